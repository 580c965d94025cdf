use serde::{Deserialize, Serialize};

use super::Split;
use crate::error::{Error, Result};
use crate::nncore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| f.is_nan() || *f <= 0.0) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive and sum to 1: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-class shuffled split. Each class contributes
/// `round(val·m)` validation and `round(test·m)` test samples (at least one
/// each) and the rest to training.
pub fn stratified_split(
    labels: &[usize],
    fractions: SplitFractions,
    rng: &Rng,
) -> Result<Vec<Split>> {
    fractions.validate()?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut tags = vec![Split::Train; labels.len()];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let m = members.len();
        if m == 0 {
            continue;
        }
        if m < 3 {
            return Err(Error::Dataset(format!(
                "class {c} has {m} samples, need at least 3 for train/val/test"
            )));
        }
        let n_val = ((fractions.val * m as f64).round() as usize).max(1);
        let n_test = ((fractions.test * m as f64).round() as usize).max(1);
        let (n_val, n_test) = if n_val + n_test >= m {
            (1, 1)
        } else {
            (n_val, n_test)
        };
        rng.fork(c as u64).shuffle(&mut members);
        for (k, &i) in members.iter().enumerate() {
            tags[i] = if k < n_val {
                Split::Val
            } else if k < n_val + n_test {
                Split::Test
            } else {
                Split::Train
            };
        }
    }
    Ok(tags)
}
