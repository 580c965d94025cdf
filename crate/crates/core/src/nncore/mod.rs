//! Dense numerical core: matrices, seeded streams, focal loss, Adam and a
//! finite-difference gradient checker.

mod adam;
mod focal;
mod gradcheck;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use focal::{focal_loss, focal_loss_weighted, FocalLossParams, FocalOutput, PROB_FLOOR};
pub use gradcheck::{gradient_check, GradCheckReport, Probe, KINK_MARGIN};
pub use matrix::Matrix;
pub use rng::{mix64, streams, Rng};
