use serde::{Deserialize, Serialize};

use super::{MultiViewDataset, Split};
use crate::error::{Error, Result};

/// Standard deviations below this mark a constant feature.
pub const CONSTANT_SD: f64 = 1e-12;

/// Per-view, per-feature `(mean, sd)` learned on the train split.
/// A recorded sd of 0 marks a constant feature, which maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreTransform {
    pub means: Vec<Vec<f64>>,
    pub sds: Vec<Vec<f64>>,
}

impl ZScoreTransform {
    /// Applies `(x - mean) / sd` to present cells of every split.
    pub fn apply(&self, ds: &MultiViewDataset) -> Result<MultiViewDataset> {
        if self.means.len() != ds.views.len() {
            return Err(Error::shape("ZScoreTransform views", self.means.len(), ds.views.len()));
        }
        let mut out = ds.clone();
        for (v, view) in out.views.iter_mut().enumerate() {
            let (means, sds) = (&self.means[v], &self.sds[v]);
            if means.len() != view.n_features() {
                return Err(Error::shape("ZScoreTransform features", means.len(), view.n_features()));
            }
            for r in 0..view.n_samples() {
                if !ds.mask.is_present(r, v) {
                    continue;
                }
                for (c, x) in view.values.row_mut(r).iter_mut().enumerate() {
                    *x = if sds[c] == 0.0 { 0.0 } else { (*x - means[c]) / sds[c] };
                }
            }
        }
        Ok(out)
    }
}

/// Z-scores every feature with train-split statistics (population sd).
pub fn zscore_standardize(ds: &MultiViewDataset) -> Result<(MultiViewDataset, ZScoreTransform)> {
    let train = ds.indices(&[Split::Train]);
    if train.is_empty() {
        return Err(Error::Dataset("empty train split".into()));
    }
    let mut means = Vec::with_capacity(ds.views.len());
    let mut sds = Vec::with_capacity(ds.views.len());
    for (v, view) in ds.views.iter().enumerate() {
        let rows: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&r| ds.mask.is_present(r, v))
            .collect();
        let p = view.n_features();
        let mut mu = vec![0.0; p];
        let mut sd = vec![0.0; p];
        if !rows.is_empty() {
            let n = rows.len() as f64;
            for &r in &rows {
                for (m, x) in mu.iter_mut().zip(view.values.row(r)) {
                    *m += x;
                }
            }
            mu.iter_mut().for_each(|m| *m /= n);
            for &r in &rows {
                for ((s, x), m) in sd.iter_mut().zip(view.values.row(r)).zip(&mu) {
                    *s += (x - m) * (x - m);
                }
            }
            for s in sd.iter_mut() {
                *s = (*s / n).sqrt();
                if *s < CONSTANT_SD {
                    *s = 0.0;
                }
            }
        }
        means.push(mu);
        sds.push(sd);
    }
    let transform = ZScoreTransform { means, sds };
    let out = transform.apply(ds)?;
    Ok((out, transform))
}
