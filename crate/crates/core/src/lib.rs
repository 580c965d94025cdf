//! Multi-view feedforward classifiers for omics-style tabular views,
//! DeepSHAP attribution, and ablation experiments that probe how stable the
//! resulting feature rankings are.
//!
//! * [`nncore`]: matrices, seeded streams, focal loss, Adam, gradient checks
//! * [`multiview`]: marginal networks, fusion, training loop
//! * [`attribution`]: DeepLIFT rescale multipliers averaged over a background set
//! * [`rankstats`]: weighted Kendall's tau and rank distributions
//! * [`perturb`]: noise-feature augmentation and layer sizing schemes
//! * [`downstream`]: random forest, AUC, Ward clustering, V-measure, top-p subsets
//! * [`dataio`]: CSV ingestion, splits, standardization, synthetic data
//! * [`harness`]: experiment orchestration, reports and SVG boxplots

pub mod attribution;
pub mod dataio;
pub mod downstream;
pub mod error;
pub mod harness;
pub mod multiview;
pub mod nncore;
pub mod perturb;
pub mod rankstats;

pub use error::{Error, Result};
