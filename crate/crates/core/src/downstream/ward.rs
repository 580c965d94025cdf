use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Matrix;

/// One agglomeration step. Clusters are named by their smallest member row;
/// `a < b` and the merged cluster keeps the name `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Ward distance `2|A||B|/(|A|+|B|) · ||c_A − c_B||²`.
    pub cost: f64,
    pub size: usize,
}

fn squared_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Full Ward merge sequence via Lance-Williams updates on squared Euclidean
/// distances. The cheapest pair merges first; ties go to the smallest
/// `(a, b)` in lexicographic order.
pub fn ward_linkage(x: &Matrix) -> Result<Vec<Merge>> {
    x.ensure_finite("ward input")?;
    let n = x.rows();
    let mut d = squared_distances(x);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && best.is_none_or(|(_, _, c)| d[i * n + j] < c) {
                    best = Some((i, j, d[i * n + j]));
                }
            }
        }
        let (a, b, cost) = best.expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[k * n + a] + (nb + nk) * d[k * n + b] - nk * cost) / (na + nb + nk);
            d[k * n + a] = v;
            d[a * n + k] = v;
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            a,
            b,
            cost,
            size: size[a],
        });
    }
    Ok(merges)
}

/// Cuts the Ward tree at `k` clusters. Labels are numbered by first
/// appearance in row order.
pub fn ward_cluster(x: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    let merges = ward_linkage(x)?;
    let mut owner: Vec<usize> = (0..n).collect();
    for m in &merges[..n - k] {
        for o in owner.iter_mut() {
            if *o == m.b {
                *o = m.a;
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    Ok(owner
        .iter()
        .map(|&o| {
            if ids[o] == usize::MAX {
                ids[o] = next;
                next += 1;
            }
            ids[o]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Rng;

    #[test]
    fn k_equals_n() {
        let x = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![1.0]]).unwrap();
        assert_eq!(ward_cluster(&x, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(ward_cluster(&x, 2).unwrap(), vec![0, 1, 0]);
        assert_eq!(ward_cluster(&x, 1).unwrap(), vec![0, 0, 0]);
        assert!(ward_cluster(&x, 0).is_err());
        assert!(ward_cluster(&x, 4).is_err());
    }

    #[test]
    fn duplicate_rows_merge_first() {
        let x = Matrix::from_rows(&[vec![3.0, 1.0], vec![0.0, 0.0], vec![7.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let m = ward_linkage(&x).unwrap();
        assert_eq!((m[0].a, m[0].b, m[0].cost), (0, 3, 0.0));
        let labels = ward_cluster(&x, 3).unwrap();
        assert_eq!(labels[0], labels[3]);
    }

    #[test]
    fn separated_blobs() {
        let mut r = Rng::new(8, 0);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let c = (i * 7) % 2;
            rows.push(vec![r.standard_normal() + 10.0 * c as f64, r.standard_normal()]);
            truth.push(c);
        }
        let labels = ward_cluster(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        let flip = labels[0] != truth[0];
        for (l, t) in labels.iter().zip(&truth) {
            assert_eq!(*l != *t, flip);
        }
    }
}
