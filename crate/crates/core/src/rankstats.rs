//! Weighted Kendall's tau with additive hyperbolic weights, and per-feature
//! rank distributions across training runs.

use serde::{Deserialize, Serialize};

use crate::attribution::RankVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    /// Mean of the two directional values.
    pub tau_w: f64,
    pub n: usize,
    /// `scores_a` supplies the weights.
    pub forward: f64,
    /// `scores_b` supplies the weights.
    pub reverse: f64,
}

/// 0-based ordinal ranks by descending score, ties broken by ascending index.
pub fn descending_ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    ranks
}

/// Weighted Kendall's tau between two score vectors over the same features.
///
/// Pair weights are `1/(1+r_i) + 1/(1+r_j)` with `r` the 0-based rank in the
/// reference ranking. Pairs tied in either vector add nothing to the
/// numerator; the denominator is the tau-b style
/// `sqrt(W(a untied) · W(b untied))`. The result averages the value computed
/// with `a` as reference and with `b` as reference.
pub fn weighted_kendall_tau(scores_a: &[f64], scores_b: &[f64]) -> Result<TauResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::shape("weighted_kendall_tau", scores_a.len(), scores_b.len()));
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "weighted tau needs at least 2 features, got {n}"
        )));
    }
    if scores_a.iter().chain(scores_b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weighted tau scores".into()));
    }
    let forward = directional_tau(scores_a, scores_b, &descending_ranks(scores_a))?;
    let reverse = directional_tau(scores_a, scores_b, &descending_ranks(scores_b))?;
    Ok(TauResult {
        tau_w: 0.5 * (forward + reverse),
        n,
        forward,
        reverse,
    })
}

/// O(n log n) evaluation: total, tie and joint-tie pair weights from sorted
/// runs, discordant weight from a merge sort over `b` after sorting by `a`.
fn directional_tau(a: &[f64], b: &[f64], reference_rank: &[usize]) -> Result<f64> {
    let n = a.len();
    let h: Vec<f64> = reference_rank.iter().map(|&r| 1.0 / (1.0 + r as f64)).collect();
    let total = (n - 1) as f64 * h.iter().sum::<f64>();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let (ties_a, tied_pairs_a) = tie_weight(&order, &h, |i, j| a[i] == a[j]);
    let (joint, joint_pairs) = tie_weight(&order, &h, |i, j| a[i] == a[j] && b[i] == b[j]);

    let mut by_b: Vec<usize> = (0..n).collect();
    by_b.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    let (ties_b, tied_pairs_b) = tie_weight(&by_b, &h, |i, j| b[i] == b[j]);

    let mut scratch = vec![0; n];
    let (discordant, discordant_pairs) = merge_discordant(&mut order, &mut scratch, b, &h);

    let untied_a = total - ties_a;
    let untied_b = total - ties_b;
    if untied_a <= 0.0 || untied_b <= 0.0 {
        return Err(Error::InvalidArgument(
            "weighted tau undefined: a ranking is entirely tied".into(),
        ));
    }
    // Exact extremes: identical tie structure and no discordant (or no
    // concordant) pairs.
    if tied_pairs_a == joint_pairs && tied_pairs_b == joint_pairs {
        let all_pairs = (n * (n - 1) / 2) as u64;
        let untied_pairs = all_pairs - joint_pairs;
        if discordant_pairs == 0 {
            return Ok(1.0);
        }
        if discordant_pairs == untied_pairs {
            return Ok(-1.0);
        }
    }
    let numerator = (total - ties_a - ties_b + joint) - 2.0 * discordant;
    Ok((numerator / (untied_a.sqrt() * untied_b.sqrt())).clamp(-1.0, 1.0))
}

/// Sum of additive pair weights, and the pair count, over pairs inside each
/// run of `same` items.
fn tie_weight(sorted: &[usize], h: &[f64], same: impl Fn(usize, usize) -> bool) -> (f64, u64) {
    let mut total = 0.0;
    let mut pairs = 0u64;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && same(sorted[start], sorted[end]) {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            let s: f64 = sorted[start..end].iter().map(|&i| h[i]).sum();
            total += (m - 1) as f64 * s;
            pairs += (m * (m - 1) / 2) as u64;
        }
        start = end;
    }
    (total, pairs)
}

/// Sorts `idx` by `b` ascending (stable) and returns the weight of all
/// strictly inverted pairs together with their count.
fn merge_discordant(idx: &mut [usize], scratch: &mut [usize], b: &[f64], h: &[f64]) -> (f64, u64) {
    let n = idx.len();
    if n < 2 {
        return (0.0, 0);
    }
    let mid = n / 2;
    let (mut weight, mut count) = {
        let (l, r) = idx.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        let (wl, cl) = merge_discordant(l, sl, b, h);
        let (wr, cr) = merge_discordant(r, sr, b, h);
        (wl + wr, cl + cr)
    };
    let mut left_remaining: f64 = idx[..mid].iter().map(|&i| h[i]).sum();
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if b[idx[i]] <= b[idx[j]] {
            left_remaining -= h[idx[i]];
            scratch[k] = idx[i];
            i += 1;
        } else {
            weight += (mid - i) as f64 * h[idx[j]] + left_remaining;
            count += (mid - i) as u64;
            scratch[k] = idx[j];
            j += 1;
        }
        k += 1;
    }
    while i < mid {
        scratch[k] = idx[i];
        i += 1;
        k += 1;
    }
    while j < n {
        scratch[k] = idx[j];
        j += 1;
        k += 1;
    }
    idx.copy_from_slice(&scratch[..n]);
    (weight, count)
}

/// Nearest-rank percentile of ascending `sorted` values: the element at
/// 1-based position `ceil(pct·N/100)`, and the minimum for `pct = 0`.
pub fn nearest_rank<T: Copy>(sorted: &[T], pct: usize) -> T {
    assert!(!sorted.is_empty() && pct <= 100);
    let pos = (pct * sorted.len()).div_ceil(100);
    sorted[pos.max(1) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub min: usize,
    pub q25: usize,
    pub median: usize,
    pub q75: usize,
    pub max: usize,
    pub mean: f64,
}

impl RankSummary {
    pub fn spread(&self) -> usize {
        self.max - self.min
    }
}

/// Per-feature rank order statistics over several runs (nearest-rank
/// percentiles, no interpolation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub features: Vec<String>,
    pub runs: usize,
    pub summaries: Vec<RankSummary>,
}

impl RankDistribution {
    /// Feature indices ordered by ascending mean rank, ties by index.
    pub fn by_mean_rank(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&i, &j| {
            self.summaries[i]
                .mean
                .total_cmp(&self.summaries[j].mean)
                .then(i.cmp(&j))
        });
        idx
    }

    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.by_mean_rank().into_iter().take(k).collect()
    }

    /// The `k` worst features by mean rank, worst first.
    pub fn bottom_k(&self, k: usize) -> Vec<usize> {
        self.by_mean_rank().into_iter().rev().take(k).collect()
    }
}

pub fn rank_distribution(runs: &[RankVector]) -> Result<RankDistribution> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("rank distribution needs at least one run".into()))?;
    if let Some(r) = runs.iter().position(|r| r.features != first.features) {
        return Err(Error::InvalidArgument(format!(
            "run {r} ranks a different feature universe"
        )));
    }
    let n = first.features.len();
    let summaries = (0..n)
        .map(|f| {
            let mut ranks: Vec<usize> = runs.iter().map(|r| r.ranks[f]).collect();
            ranks.sort_unstable();
            RankSummary {
                min: ranks[0],
                q25: nearest_rank(&ranks, 25),
                median: nearest_rank(&ranks, 50),
                q75: nearest_rank(&ranks, 75),
                max: ranks[ranks.len() - 1],
                mean: ranks.iter().sum::<usize>() as f64 / ranks.len() as f64,
            }
        })
        .collect();
    Ok(RankDistribution {
        features: first.features.clone(),
        runs: runs.len(),
        summaries,
    })
}
