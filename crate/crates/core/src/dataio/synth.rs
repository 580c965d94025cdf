use serde::{Deserialize, Serialize};

use super::{stratified_split, LabelTable, MultiViewDataset, SplitFractions, ViewMatrix};
use crate::error::{Error, Result};
use crate::nncore::{streams, Matrix, Rng};

/// Synthetic multi-view dataset with planted informative features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub view_dims: Vec<usize>,
    #[serde(default)]
    pub view_names: Vec<String>,
    pub samples: usize,
    pub classes: usize,
    /// Informative feature count per view.
    pub informative: Vec<usize>,
    pub effect_size: f64,
    pub seed: u64,
    #[serde(default)]
    pub fractions: SplitFractions,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.view_dims.is_empty() || self.view_dims.contains(&0) {
            return Err(Error::Config(format!("bad view dims {:?}", self.view_dims)));
        }
        if self.informative.len() != self.view_dims.len() {
            return Err(Error::Config("one informative count per view required".into()));
        }
        if let Some(v) = (0..self.view_dims.len()).find(|&v| self.informative[v] > self.view_dims[v]) {
            return Err(Error::Config(format!(
                "view {v}: {} informative features exceed {} dims",
                self.informative[v], self.view_dims[v]
            )));
        }
        if !(self.effect_size > 0.0 && self.effect_size.is_finite()) {
            return Err(Error::Config(format!("effect size {} must be > 0", self.effect_size)));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least 2 classes required".into()));
        }
        if !self.view_names.is_empty() && self.view_names.len() != self.view_dims.len() {
            return Err(Error::Config("one view name per view required".into()));
        }
        if self.samples < 3 * self.classes {
            return Err(Error::Config(format!(
                "{} samples cannot cover {} classes with 3 per class",
                self.samples, self.classes
            )));
        }
        self.fractions.validate()
    }

    pub fn view_name(&self, v: usize) -> String {
        self.view_names
            .get(v)
            .cloned()
            .unwrap_or_else(|| format!("view{v}"))
    }
}

/// Indices of the planted informative features, per view, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub informative: Vec<Vec<usize>>,
}

/// Background features are N(0, 1); each informative feature gets a mean
/// shift of `±effect_size` whose sign depends on the class (for two classes
/// the signs are opposite). Labels cycle through the classes, splits are
/// stratified with the config's fractions.
pub fn synth_multiview(cfg: &SynthConfig) -> Result<(MultiViewDataset, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.samples;
    let labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
    let sample_ids: Vec<String> = (0..n).map(|i| format!("S{i:04}")).collect();
    let root = Rng::new(cfg.seed, streams::SYNTH);

    let mut views = Vec::with_capacity(cfg.view_dims.len());
    let mut truth = Vec::with_capacity(cfg.view_dims.len());
    for (v, &dim) in cfg.view_dims.iter().enumerate() {
        let mut pick = root.fork(2 * v as u64);
        let mut informative = pick.sample_indices(dim, cfg.informative[v]);
        informative.sort_unstable();
        let mut shift = vec![vec![0.0; cfg.classes]; dim];
        for &f in &informative {
            let signs: Vec<f64> = if cfg.classes == 2 {
                let s = if pick.bernoulli(0.5) { 1.0 } else { -1.0 };
                vec![s, -s]
            } else {
                (0..cfg.classes)
                    .map(|_| if pick.bernoulli(0.5) { 1.0 } else { -1.0 })
                    .collect()
            };
            shift[f] = signs.into_iter().map(|s| s * cfg.effect_size).collect();
        }
        let mut values = Matrix::zeros(n, dim);
        let mut draw = root.fork(2 * v as u64 + 1);
        for r in 0..n {
            for (c, x) in values.row_mut(r).iter_mut().enumerate() {
                *x = draw.standard_normal() + shift[c][labels[r]];
            }
        }
        let name = cfg.view_name(v);
        let features = (0..dim).map(|f| format!("{name}_{f:05}")).collect();
        views.push(ViewMatrix::new(name, sample_ids.clone(), features, values)?);
        truth.push(informative);
    }

    let class_names: Vec<String> = (0..cfg.classes).map(|c| format!("class{c}")).collect();
    let raw: Vec<String> = labels.iter().map(|&l| class_names[l].clone()).collect();
    let table = LabelTable::from_strings(sample_ids, &raw)?;
    let ds = MultiViewDataset::assemble(views, table, false)?;
    let splits = stratified_split(&ds.labels, cfg.fractions, &root.fork(u64::MAX))?;
    Ok((ds.with_splits(splits)?, GroundTruth { informative: truth }))
}
