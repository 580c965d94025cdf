//! Multi-view tabular data: CSV views, sample alignment, stratified splits,
//! train-statistics z-scoring and a synthetic generator with planted signal.

mod dataset;
mod manifest;
mod split;
mod standardize;
mod synth;
mod view;

pub use dataset::{load_labels_csv, write_labels_csv, LabelTable, MultiViewDataset, Split};
pub use manifest::{file_sha256, sha256_hex, DatasetManifest, ManifestFile};
pub use split::{stratified_split, SplitFractions};
pub use standardize::{zscore_standardize, ZScoreTransform, CONSTANT_SD};
pub use synth::{synth_multiview, GroundTruth, SynthConfig};
pub use view::{load_view_csv, write_view_csv, LoadOptions, ViewMatrix, SAMPLE_ID_COLUMN};
