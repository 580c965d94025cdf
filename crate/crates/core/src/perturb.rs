//! Noise-feature augmentation and the layer sizing schemes used by the
//! compression and subset experiments.

use serde::{Deserialize, Serialize};

use crate::dataio::ViewMatrix;
use crate::error::{Error, Result};
use crate::multiview::{FusionScheme, LayerPlan, ViewLayers};
use crate::nncore::{Matrix, Rng};

/// Prefix of every generated noise feature name.
pub const NOISE_PREFIX: &str = "NOISE__";

pub fn is_noise_feature(name: &str) -> bool {
    name.starts_with(NOISE_PREFIX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub view: usize,
    pub n_noise: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Appends `n_noise` Gaussian columns. Each column copies the (mean,
/// variance) pair of a uniformly drawn original feature and is filled with
/// independent draws from that normal. Column `j` uses its own sub-stream,
/// so a smaller noise level is always a prefix of a larger one.
pub fn gen_noise_features(view: &ViewMatrix, spec: &NoiseSpec) -> Result<ViewMatrix> {
    let p = view.n_features();
    if p == 0 {
        return Err(Error::InvalidArgument("view has no original features".into()));
    }
    if spec.n_noise == 0 {
        return Ok(view.clone());
    }
    let n = view.n_samples();
    let means = view.values.column_means();
    let vars: Vec<f64> = (0..p)
        .map(|c| {
            if n < 2 {
                return 0.0;
            }
            let mu = means[c];
            let ss: f64 = (0..n).map(|r| (view.values.get(r, c) - mu).powi(2)).sum();
            ss / (n - 1) as f64
        })
        .collect();

    let root = Rng::new(spec.seed, spec.stream);
    let mut noise = Matrix::zeros(n, spec.n_noise);
    for j in 0..spec.n_noise {
        let mut r = root.fork(j as u64);
        let src = r.below(p);
        let (mu, var) = (means[src], vars[src]);
        assert!(var >= 0.0, "sampled variance is negative");
        let sd = var.sqrt();
        for row in 0..n {
            noise.set(row, j, r.normal(mu, sd));
        }
    }
    let mut names = view.feature_names.clone();
    names.extend((0..spec.n_noise).map(|j| format!("{NOISE_PREFIX}{}_{j:05}", view.view_id)));
    ViewMatrix::new(
        view.view_id.clone(),
        view.sample_ids.clone(),
        names,
        Matrix::hconcat(&[&view.values, &noise])?,
    )
}

/// How the dynamic scheme splits a conserved per-depth width total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicRule {
    /// Shares proportional to the raw input dims `d1 / (d1 + d2)`.
    #[default]
    InputProportional,
    /// Shares proportional to `base_width · new_dim / base_dim`: the base
    /// plan is a fixed point and a growing view only ever gains width.
    BaseRelative,
}

pub const DEFAULT_WIDTH_FLOOR: usize = 8;

fn split_total(total: usize, share1: f64, share2: f64, floor: usize) -> Result<(usize, usize)> {
    if total < 2 * floor {
        return Err(Error::InvalidArgument(format!(
            "width total {total} cannot give both views the floor {floor}"
        )));
    }
    let raw = (total as f64 * share1 / (share1 + share2)).floor() as usize;
    let w1 = raw.clamp(floor, total - floor);
    Ok((w1, total - w1))
}

/// Re-splits each depth's total width (hidden1, hidden2, embedding) between
/// the two views according to their new input dims; the fusion layer is
/// left alone, as are the embeddings under mean fusion (which needs them
/// equal). View 1 gets the floored share, view 2 the remainder, and neither
/// drops below `floor`.
pub fn dynamic_layer_plan(
    base: &LayerPlan,
    new_dims: &[usize],
    floor: usize,
    rule: DynamicRule,
) -> Result<LayerPlan> {
    if base.views.len() != 2 || new_dims.len() != 2 {
        return Err(Error::InvalidArgument(
            "dynamic sizing is defined for two views".into(),
        ));
    }
    if floor == 0 {
        return Err(Error::InvalidArgument("width floor must be >= 1".into()));
    }
    let (b1, b2) = (base.views[0], base.views[1]);
    if new_dims[0] < b1.input || new_dims[1] < b2.input {
        return Err(Error::InvalidArgument(format!(
            "new dims {new_dims:?} shrink the base dims ({}, {})",
            b1.input, b2.input
        )));
    }
    let mut plan = base.clone();
    plan.views[0].input = new_dims[0];
    plan.views[1].input = new_dims[1];
    if new_dims[0] == b1.input && new_dims[1] == b2.input {
        return Ok(plan);
    }
    let (d1, d2) = (new_dims[0] as f64, new_dims[1] as f64);
    let depth = |w1: usize, w2: usize| -> Result<(usize, usize)> {
        let (s1, s2) = match rule {
            DynamicRule::BaseRelative => (
                w1 as f64 * d1 / b1.input as f64,
                w2 as f64 * d2 / b2.input as f64,
            ),
            DynamicRule::InputProportional => (d1, d2),
        };
        split_total(w1 + w2, s1, s2, floor)
    };
    let (h1a, h1b) = depth(b1.hidden1, b2.hidden1)?;
    let (h2a, h2b) = depth(b1.hidden2, b2.hidden2)?;
    let (ea, eb) = match base.fusion {
        FusionScheme::Mean => (b1.embedding, b2.embedding),
        FusionScheme::Concat => depth(b1.embedding, b2.embedding)?,
    };
    plan.views[0] = ViewLayers::new(new_dims[0], h1a, h2a, ea);
    plan.views[1] = ViewLayers::new(new_dims[1], h1b, h2b, eb);
    Ok(plan)
}

/// Concat-fusion embedding widths: `round(base · d_v / d_min)`, half up.
pub fn proportional_concat_plan(base_width: usize, dims: &[usize]) -> Result<Vec<usize>> {
    if base_width == 0 || dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "proportional widths need positive inputs (base {base_width}, dims {dims:?})"
        )));
    }
    let d_min = *dims.iter().min().expect("nonempty") as u128;
    Ok(dims
        .iter()
        .map(|&d| {
            let num = 2 * base_width as u128 * d as u128 + d_min;
            (num / (2 * d_min)) as usize
        })
        .collect())
}

/// Hidden widths placed geometrically between the input dim and the
/// embedding width (at 1/3 and 2/3 of the log-distance).
pub fn interpolated_view_layers(input: usize, embedding: usize) -> ViewLayers {
    let (d, e) = (input as f64, embedding as f64);
    let at = |t: f64| (d.powf(1.0 - t) * e.powf(t)).round().max(1.0) as usize;
    ViewLayers::new(input, at(1.0 / 3.0), at(2.0 / 3.0), embedding)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizingKind {
    /// Layer widths never change.
    Static,
    /// Conserved per-depth totals re-split by input size (two views).
    Dynamic,
    /// Concat embeddings scaled by input size relative to the smallest view.
    ProportionalConcat,
}

impl SizingKind {
    pub fn name(self) -> &'static str {
        match self {
            SizingKind::Static => "static",
            SizingKind::Dynamic => "dynamic",
            SizingKind::ProportionalConcat => "proportional-concat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingScheme {
    pub kind: SizingKind,
    pub base: LayerPlan,
    pub floor: usize,
    #[serde(default)]
    pub rule: DynamicRule,
}

impl SizingScheme {
    pub fn new(kind: SizingKind, base: LayerPlan) -> Self {
        SizingScheme {
            kind,
            base,
            floor: DEFAULT_WIDTH_FLOOR,
            rule: DynamicRule::default(),
        }
    }

    /// Plan for data whose views now have `dims` inputs.
    pub fn plan_for(&self, dims: &[usize]) -> Result<LayerPlan> {
        if self.floor == 0 {
            return Err(Error::InvalidArgument("width floor must be >= 1".into()));
        }
        if dims.len() != self.base.views.len() {
            return Err(Error::shape("sizing dims", self.base.views.len(), dims.len()));
        }
        let plan = match self.kind {
            SizingKind::Static => {
                let mut p = self.base.clone();
                for (l, &d) in p.views.iter_mut().zip(dims) {
                    l.input = d;
                }
                p
            }
            SizingKind::Dynamic => dynamic_layer_plan(&self.base, dims, self.floor, self.rule)?,
            SizingKind::ProportionalConcat => {
                let smallest = dims
                    .iter()
                    .enumerate()
                    .min_by_key(|&(i, &d)| (d, i))
                    .map(|(i, _)| i)
                    .expect("nonempty");
                let base_width = self.base.views[smallest].embedding;
                let widths = proportional_concat_plan(base_width, dims)?;
                LayerPlan {
                    views: dims
                        .iter()
                        .zip(widths)
                        .map(|(&d, e)| interpolated_view_layers(d, e))
                        .collect(),
                    fusion: FusionScheme::Concat,
                    fusion_hidden: self.base.fusion_hidden,
                    classes: self.base.classes,
                }
            }
        };
        plan.validate()?;
        Ok(plan)
    }
}
