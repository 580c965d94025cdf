use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{SplitFractions, SynthConfig};
use crate::downstream::ForestConfig;
use crate::error::{Error, Result};
use crate::multiview::{FusionScheme, LayerPlan, TrainConfig, ViewLayers};
use crate::perturb::{DynamicRule, SizingKind, DEFAULT_WIDTH_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Compression,
    Stability,
    Subset,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Compression => "compression",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Subset => "subset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvViewSource {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "source")]
pub enum DatasetSource {
    Synth(SynthConfig),
    Csv {
        views: Vec<CsvViewSource>,
        labels: PathBuf,
        #[serde(default)]
        allow_missing_views: bool,
        #[serde(default)]
        impute_median: bool,
        /// Defaults to the master seed.
        #[serde(default)]
        split_seed: Option<u64>,
        #[serde(default)]
        fractions: SplitFractions,
    },
}

/// Hidden and embedding widths of one marginal network; the input width
/// comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewWidths {
    pub hidden1: usize,
    pub hidden2: usize,
    pub embedding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePlan {
    pub views: Vec<ViewWidths>,
    pub fusion_hidden: usize,
}

impl BasePlan {
    pub fn to_plan(&self, dims: &[usize], fusion: FusionScheme, classes: usize) -> Result<LayerPlan> {
        if dims.len() != self.views.len() {
            return Err(Error::Config(format!(
                "base plan has {} views, data has {}",
                self.views.len(),
                dims.len()
            )));
        }
        let plan = LayerPlan {
            views: self
                .views
                .iter()
                .zip(dims)
                .map(|(w, &d)| ViewLayers::new(d, w.hidden1, w.hidden2, w.embedding))
                .collect(),
            fusion,
            fusion_hidden: self.fusion_hidden,
            classes,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotConfig {
    pub width: u32,
    pub height: u32,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            width: 800,
            height: 500,
            x_label: None,
            y_label: None,
        }
    }
}

fn default_runs() -> usize {
    10
}
fn default_noise() -> Vec<usize> {
    vec![0]
}
fn default_sizing() -> Vec<SizingKind> {
    vec![SizingKind::Static]
}
fn default_fusion() -> Vec<FusionScheme> {
    vec![FusionScheme::Concat]
}
fn default_percents() -> Vec<f64> {
    vec![75.0, 50.0, 25.0, 10.0]
}
fn default_floor() -> usize {
    DEFAULT_WIDTH_FLOOR
}
fn default_true() -> bool {
    true
}
fn default_top() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dataset: DatasetSource,
    pub plan: BasePlan,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_noise")]
    pub noise_levels: Vec<usize>,
    /// View that receives the noise features.
    #[serde(default)]
    pub noise_view: usize,
    #[serde(default = "default_sizing")]
    pub sizing: Vec<SizingKind>,
    #[serde(default)]
    pub dynamic_rule: DynamicRule,
    #[serde(default = "default_floor")]
    pub width_floor: usize,
    #[serde(default = "default_fusion")]
    pub fusion: Vec<FusionScheme>,
    #[serde(default = "default_percents")]
    pub percents: Vec<f64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    /// Cap on background rows drawn from the train split; all when absent.
    #[serde(default)]
    pub background: Option<usize>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Features listed at each end of the stability ranking.
    #[serde(default = "default_top")]
    pub top_k: usize,
    #[serde(default)]
    pub plot: PlotConfig,
}

impl ExperimentConfig {
    /// JSON or TOML, chosen by extension (anything but `.toml` is JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg: ExperimentConfig = if is_toml {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let DatasetSource::Csv { views, labels, .. } = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new("."));
            for v in views.iter_mut() {
                v.path = base.join(&v.path);
            }
            *labels = base.join(&*labels);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.kind == ExperimentKind::Stability && self.runs < 2 {
            log::warn!("stability with a single run yields degenerate rank distributions");
        }
        if self.noise_levels.is_empty() {
            return bad("noise_levels must not be empty".into());
        }
        if self.noise_levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("noise levels {:?} must be strictly increasing", self.noise_levels));
        }
        if self.kind == ExperimentKind::Compression && self.noise_levels[0] != 0 {
            return bad("compression needs noise level 0 as the reference".into());
        }
        if self.noise_view >= self.plan.views.len() {
            return bad(format!("noise view {} out of range", self.noise_view));
        }
        if self.sizing.is_empty() || self.fusion.is_empty() {
            return bad("sizing and fusion lists must not be empty".into());
        }
        if self.percents.is_empty() || self.percents.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
            return bad(format!("percents {:?} must lie in (0, 100]", self.percents));
        }
        if self.background == Some(0) {
            return bad("background cap must be >= 1".into());
        }
        if self.width_floor == 0 {
            return bad("width floor must be >= 1".into());
        }
        if self.plot.width < 200 || self.plot.height < 200 {
            return bad("plot must be at least 200x200".into());
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.train.validate().map_err(wrap)?;
        self.forest.validate().map_err(wrap)?;
        if let DatasetSource::Synth(s) = &self.dataset {
            s.validate().map_err(wrap)?;
            if s.view_dims.len() != self.plan.views.len() {
                return bad("synthetic views and plan views differ in count".into());
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON form, independent of source formatting.
    pub fn hash(&self) -> Result<String> {
        Ok(crate::dataio::sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}
