use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Matrix;

/// Mann-Whitney AUC of `scores` for the positive class; tied scores count 0.5.
pub fn auc_binary(positive: &[bool], scores: &[f64]) -> Result<f64> {
    if positive.len() != scores.len() {
        return Err(Error::shape("auc scores", positive.len(), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "auc needs both positive and negative samples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    // Twice the midrank sum of positives keeps everything integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos_in_run = order[start..end].iter().filter(|&&i| positive[i]).count() as u128;
        // 1-based ranks start+1..=end, midrank (start+1+end)/2
        twice_rank_sum += pos_in_run * (start + 1 + end) as u128;
        start = end;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

/// Binary AUC on column 1 for two-column probabilities, macro one-vs-rest
/// otherwise (classes absent from `labels` are skipped).
pub fn auc_score(labels: &[usize], probabilities: &Matrix) -> Result<f64> {
    if labels.len() != probabilities.rows() {
        return Err(Error::shape("auc labels", probabilities.rows(), labels.len()));
    }
    let classes = probabilities.cols();
    if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    if classes == 2 {
        let pos: Vec<bool> = labels.iter().map(|&c| c == 1).collect();
        return auc_binary(&pos, &probabilities.column(1));
    }
    let present: Vec<usize> = (0..classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(Error::InvalidArgument(
            "auc needs at least two classes present".into(),
        ));
    }
    let mut total = 0.0;
    for &c in &present {
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        total += auc_binary(&pos, &probabilities.column(c))?;
    }
    Ok(total / present.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterQuality {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Conditional entropy H(A|B) from a contingency table keyed by (a, b).
fn conditional_entropy(joint: &BTreeMap<(usize, usize), usize>, b_totals: &BTreeMap<usize, usize>, n: f64, swap: bool) -> f64 {
    joint
        .iter()
        .map(|(&(a, b), &c)| {
            let cond = if swap { a } else { b };
            let p = c as f64 / n;
            -p * (c as f64 / b_totals[&cond] as f64).ln()
        })
        .sum()
}

/// Homogeneity, completeness and their harmonic mean (beta = 1).
pub fn v_measure(truth: &[usize], predicted: &[usize]) -> Result<ClusterQuality> {
    if truth.len() != predicted.len() {
        return Err(Error::shape("v_measure labels", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("v_measure needs at least one sample".into()));
    }
    let n = truth.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut class_totals: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cluster_totals: BTreeMap<usize, usize> = BTreeMap::new();
    for (&c, &k) in truth.iter().zip(predicted) {
        *joint.entry((c, k)).or_default() += 1;
        *class_totals.entry(c).or_default() += 1;
        *cluster_totals.entry(k).or_default() += 1;
    }
    let h_c = entropy(class_totals.values().copied(), n);
    let h_k = entropy(cluster_totals.values().copied(), n);
    let h_c_given_k = conditional_entropy(&joint, &cluster_totals, n, false);
    let h_k_given_c = conditional_entropy(&joint, &class_totals, n, true);
    let homogeneity = if h_c == 0.0 { 1.0 } else { (1.0 - h_c_given_k / h_c).clamp(0.0, 1.0) };
    let completeness = if h_k == 0.0 { 1.0 } else { (1.0 - h_k_given_c / h_k).clamp(0.0, 1.0) };
    let v = if homogeneity + completeness > 0.0 {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    } else {
        0.0
    };
    Ok(ClusterQuality {
        homogeneity,
        completeness,
        v_measure: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_probs(p: &[f64]) -> Matrix {
        Matrix::from_rows(&p.iter().map(|&x| vec![1.0 - x, x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn auc_hand_cases() {
        let a = auc_score(&[1, 0, 1, 0], &binary_probs(&[0.9, 0.9, 0.8, 0.1])).unwrap();
        assert!((a - 0.625).abs() < 1e-12);
        assert_eq!(auc_score(&[0, 0, 1, 1], &binary_probs(&[0.1, 0.2, 0.8, 0.9])).unwrap(), 1.0);
        assert_eq!(auc_binary(&[true, false, true], &[0.3, 0.3, 0.3]).unwrap(), 0.5);
        assert!(auc_binary(&[true, true], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn auc_multiclass_macro() {
        let p = Matrix::from_rows(&[
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap();
        assert_eq!(auc_score(&[0, 1, 2], &p).unwrap(), 1.0);
        // class 2 absent: skipped
        assert_eq!(auc_score(&[0, 1, 1], &p).unwrap(), 0.875);
        assert!(auc_score(&[1, 1, 1], &p).is_err());
    }

    #[test]
    fn v_measure_hand_cases() {
        let q = v_measure(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert_eq!(q.homogeneity, 1.0);
        assert!((q.completeness - 2.0 / 3.0).abs() < 1e-12);
        assert!((q.v_measure - 0.8).abs() < 1e-12);
        assert_eq!(v_measure(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap().v_measure, 1.0);
        assert_eq!(v_measure(&[4, 7, 9, 7], &[0, 1, 2, 1]).unwrap().v_measure, 1.0);
        let single = v_measure(&[0, 1, 0, 1], &[3, 3, 3, 3]).unwrap();
        assert_eq!((single.homogeneity, single.v_measure), (0.0, 0.0));
        assert!(v_measure(&[0], &[0, 1]).is_err());
        assert!(v_measure(&[], &[]).is_err());
    }
}
