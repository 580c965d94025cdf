use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Focal loss constants: focusing exponent `gamma` and per-class weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalLossParams {
    pub gamma: f64,
    /// Per-class weight. An empty vector means 1.0 for every class.
    #[serde(default)]
    pub alpha: Vec<f64>,
}

impl Default for FocalLossParams {
    fn default() -> Self {
        FocalLossParams {
            gamma: 2.0,
            alpha: Vec::new(),
        }
    }
}

impl FocalLossParams {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<Self> {
        let p = FocalLossParams { gamma, alpha };
        p.validate()?;
        Ok(p)
    }

    /// Plain cross-entropy.
    pub fn cross_entropy() -> Self {
        FocalLossParams {
            gamma: 0.0,
            alpha: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focal gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "focal alpha entries must lie in (0, 1], got {a}"
            )));
        }
        Ok(())
    }

    fn alpha_for(&self, class: usize) -> f64 {
        self.alpha.get(class).copied().unwrap_or(1.0)
    }
}

/// Mean focal loss and its gradient with respect to the pre-softmax logits.
#[derive(Debug, Clone)]
pub struct FocalOutput {
    pub loss: f64,
    pub grad_logits: Matrix,
}

/// Focal loss `-α_t (1 - p_t)^γ ln p_t` averaged over samples.
///
/// `probabilities` must be row-wise softmax outputs; the returned gradient is
/// taken through the softmax, i.e. with respect to the logits that produced
/// them.
pub fn focal_loss(
    probabilities: &Matrix,
    labels: &[usize],
    params: &FocalLossParams,
) -> Result<FocalOutput> {
    focal_loss_weighted(probabilities, labels, None, params)
}

/// Focal loss averaged over the samples with `include[i] == true`.
/// Excluded samples get a zero gradient row.
pub fn focal_loss_weighted(
    probabilities: &Matrix,
    labels: &[usize],
    include: Option<&[bool]>,
    params: &FocalLossParams,
) -> Result<FocalOutput> {
    params.validate()?;
    let (n, classes) = probabilities.shape();
    if labels.len() != n {
        return Err(Error::shape("focal_loss labels", n, labels.len()));
    }
    if let Some(inc) = include {
        if inc.len() != n {
            return Err(Error::shape("focal_loss mask", n, inc.len()));
        }
    }
    if !params.alpha.is_empty() && params.alpha.len() != classes {
        return Err(Error::shape("focal_loss alpha", classes, params.alpha.len()));
    }
    for r in 0..n {
        let sum: f64 = probabilities.row(r).iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { row: r, sum });
        }
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }

    let counted = include.map_or(n, |inc| inc.iter().filter(|&&b| b).count());
    let mut grad = Matrix::zeros(n, classes);
    if counted == 0 {
        return Ok(FocalOutput {
            loss: 0.0,
            grad_logits: grad,
        });
    }
    let inv_n = 1.0 / counted as f64;
    let gamma = params.gamma;
    let mut total = 0.0;
    for (r, &t) in labels.iter().enumerate() {
        if include.is_some_and(|inc| !inc[r]) {
            continue;
        }
        let alpha = params.alpha_for(t);
        let p_t = probabilities.get(r, t).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let one_minus = 1.0 - p_t;
        let log_p = p_t.ln();
        let focus = one_minus.powf(gamma);
        total += -alpha * focus * log_p;

        // dFL/dp_t, then through softmax: dp_t/dz_j = p_t (δ_tj - p_j).
        let d_focus = if gamma == 0.0 {
            0.0
        } else {
            gamma * one_minus.powf(gamma - 1.0) * log_p
        };
        let dl_dpt = alpha * (d_focus - focus / p_t);
        let g_row = grad.row_mut(r);
        let p_row = probabilities.row(r);
        for (j, g) in g_row.iter_mut().enumerate() {
            let delta = if j == t { 1.0 } else { 0.0 };
            *g = dl_dpt * p_t * (delta - p_row[j]) * inv_n;
        }
    }
    Ok(FocalOutput {
        loss: total * inv_n,
        grad_logits: grad,
    })
}
