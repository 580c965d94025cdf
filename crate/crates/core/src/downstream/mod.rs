//! Feature-quality oracles: random forest with AUC, Ward clustering with
//! V-measure, and top-p% feature subsets.

mod forest;
mod metrics;
mod ward;

pub use forest::{rf_fit_predict, DecisionTree, ForestConfig, RandomForest};
pub use metrics::{auc_binary, auc_score, v_measure, ClusterQuality};
pub use ward::{ward_cluster, ward_linkage, Merge};

use crate::attribution::RankVector;
use crate::error::{Error, Result};

/// Number of features kept at `p` percent of `n`: `ceil(p·n/100)`, at least 1.
pub fn subset_size(n: usize, p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidArgument(format!("subset percent {p} outside (0, 100]")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot subset an empty ranking".into()));
    }
    let k = (p * n as f64 / 100.0).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// The best-ranked `ceil(p·N/100)` feature indices, best first.
pub fn subset_top_p(ranks: &RankVector, p: f64) -> Result<Vec<usize>> {
    let k = subset_size(ranks.len(), p)?;
    let mut order = ranks.order();
    order.truncate(k);
    Ok(order)
}
