use serde::{Deserialize, Serialize};

use super::PresenceMask;
use crate::error::{Error, Result};
use crate::nncore::{focal_loss_weighted, FocalLossParams, Matrix};

/// Loss weights: the fusion head first, then one per view head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights(pub Vec<f64>);

impl LossWeights {
    pub fn uniform(views: usize) -> Self {
        LossWeights(vec![1.0; views + 1])
    }

    pub fn fusion(&self) -> f64 {
        self.0[0]
    }

    pub fn view(&self, v: usize) -> f64 {
        self.0[v + 1]
    }

    pub fn check(&self, views: usize) -> Result<()> {
        if self.0.len() != views + 1 {
            return Err(Error::shape("loss weights", views + 1, self.0.len()));
        }
        if let Some(w) = self.0.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("negative loss weight {w}")));
        }
        Ok(())
    }

    /// `w_fusion·fusion + Σ w_v·view_v`.
    pub fn combine(&self, fusion: f64, views: &[f64]) -> Result<f64> {
        self.check(views.len())?;
        let mut total = self.fusion() * fusion;
        for (v, l) in views.iter().enumerate() {
            total += self.view(v) * l;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub struct TotalLoss {
    pub value: f64,
    pub fusion_loss: f64,
    pub view_losses: Vec<f64>,
    pub grad_logits: Matrix,
    pub grad_view_logits: Vec<Matrix>,
}

/// Weighted sum of the fusion-head focal loss and each view head's focal
/// loss. A view head only sees samples where its view is present.
pub fn total_loss(
    logits: &Matrix,
    view_logits: &[&Matrix],
    labels: &[usize],
    weights: &LossWeights,
    focal: &FocalLossParams,
    mask: &PresenceMask,
) -> Result<TotalLoss> {
    weights.check(view_logits.len())?;
    let n = logits.rows();
    if let Some(v) = view_logits.iter().find(|v| v.rows() != n) {
        return Err(Error::shape("total_loss rows", n, v.rows()));
    }
    let fused = focal_loss_weighted(&logits.softmax_rows(), labels, None, focal)?;
    let mut grad_logits = fused.grad_logits;
    grad_logits.scale(weights.fusion());

    let mut view_losses = Vec::with_capacity(view_logits.len());
    let mut grad_view_logits = Vec::with_capacity(view_logits.len());
    for (v, vl) in view_logits.iter().enumerate() {
        let include = mask.view_column(v);
        let out = focal_loss_weighted(&vl.softmax_rows(), labels, Some(&include), focal)?;
        let mut g = out.grad_logits;
        g.scale(weights.view(v));
        view_losses.push(out.loss);
        grad_view_logits.push(g);
    }
    let value = weights.combine(fused.loss, &view_losses)?;
    Ok(TotalLoss {
        value,
        fusion_loss: fused.loss,
        view_losses,
        grad_logits,
        grad_view_logits,
    })
}
