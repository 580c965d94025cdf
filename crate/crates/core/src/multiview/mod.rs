//! Multi-view classifier: one marginal network per view (two hidden
//! affine+ReLU layers and a linear embedding), mean or concat fusion, a
//! post-fusion hidden layer and a final head, plus a prediction head per view.

mod fusion;
mod loss;
mod network;
mod plan;
mod train;

pub use fusion::{fuse_latents, PresenceMask};
pub use loss::{total_loss, LossWeights, TotalLoss};
pub use network::{Dense, ForwardTrace, MarginalNet, Mode, Network, Params, ViewTrace};
pub use plan::{FusionScheme, LayerPlan, ViewLayers};
pub use train::{
    retrain_iterations, train, HistoryEntry, Phase, PlateauTracker, SeedRecord, TrainConfig,
    TrainedModel,
};
