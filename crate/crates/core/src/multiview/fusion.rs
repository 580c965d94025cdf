use serde::{Deserialize, Serialize};

use super::FusionScheme;
use crate::error::{Error, Result};
use crate::nncore::Matrix;

/// Per-sample, per-view presence flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceMask {
    views: usize,
    present: Vec<Vec<bool>>,
}

impl PresenceMask {
    pub fn all_present(samples: usize, views: usize) -> Self {
        PresenceMask {
            views,
            present: vec![vec![true; views]; samples],
        }
    }

    /// Builds a mask from per-sample rows; every sample needs at least one view.
    pub fn new(present: Vec<Vec<bool>>) -> Result<Self> {
        let views = present.first().map_or(0, Vec::len);
        for (s, row) in present.iter().enumerate() {
            if row.len() != views {
                return Err(Error::shape("PresenceMask row", views, row.len()));
            }
            if !row.iter().any(|&p| p) {
                return Err(Error::Dataset(format!("sample {s} has no present view")));
            }
        }
        Ok(PresenceMask { views, present })
    }

    pub fn samples(&self) -> usize {
        self.present.len()
    }

    pub fn views(&self) -> usize {
        self.views
    }

    #[inline]
    pub fn is_present(&self, sample: usize, view: usize) -> bool {
        self.present[sample][view]
    }

    pub fn view_column(&self, view: usize) -> Vec<bool> {
        self.present.iter().map(|r| r[view]).collect()
    }

    pub fn present_count(&self, sample: usize) -> usize {
        self.present[sample].iter().filter(|&&p| p).count()
    }

    pub fn all(&self) -> bool {
        self.present.iter().all(|r| r.iter().all(|&p| p))
    }

    pub fn select_rows(&self, idx: &[usize]) -> PresenceMask {
        PresenceMask {
            views: self.views,
            present: idx.iter().map(|&i| self.present[i].clone()).collect(),
        }
    }

    pub(crate) fn first_missing(&self) -> Option<(usize, usize)> {
        self.present
            .iter()
            .enumerate()
            .find_map(|(s, r)| r.iter().position(|&p| !p).map(|v| (s, v)))
    }
}

/// Merges per-view embeddings.
///
/// Mean fusion averages each sample over its present views only; concat
/// fusion places the views side by side in declared order and rejects any
/// missing view.
pub fn fuse_latents(
    latents: &[Matrix],
    scheme: FusionScheme,
    mask: &PresenceMask,
) -> Result<Matrix> {
    let n = check_latents(latents, mask)?;
    match scheme {
        FusionScheme::Mean => {
            let width = latents[0].cols();
            if let Some(l) = latents.iter().find(|l| l.cols() != width) {
                return Err(Error::InvalidArgument(format!(
                    "mean fusion needs equal widths ({width} vs {})",
                    l.cols()
                )));
            }
            let mut out = Matrix::zeros(n, width);
            for s in 0..n {
                let count = mask.present_count(s) as f64;
                let row = out.row_mut(s);
                for (v, lat) in latents.iter().enumerate() {
                    if !mask.is_present(s, v) {
                        continue;
                    }
                    for (o, x) in row.iter_mut().zip(lat.row(s)) {
                        *o += x;
                    }
                }
                for o in row.iter_mut() {
                    *o /= count;
                }
            }
            Ok(out)
        }
        FusionScheme::Concat => {
            if let Some((sample, view)) = mask.first_missing() {
                return Err(Error::MissingView { view, sample });
            }
            let refs: Vec<&Matrix> = latents.iter().collect();
            Matrix::hconcat(&refs)
        }
    }
}

/// Splits the gradient of the fused matrix back onto each view's embedding.
pub(crate) fn unfuse_gradient(
    grad_fused: &Matrix,
    widths: &[usize],
    scheme: FusionScheme,
    mask: &PresenceMask,
) -> Vec<Matrix> {
    let n = grad_fused.rows();
    match scheme {
        FusionScheme::Mean => widths
            .iter()
            .enumerate()
            .map(|(v, &w)| {
                let mut g = Matrix::zeros(n, w);
                for s in 0..n {
                    if mask.is_present(s, v) {
                        let scale = 1.0 / mask.present_count(s) as f64;
                        for (o, x) in g.row_mut(s).iter_mut().zip(grad_fused.row(s)) {
                            *o = x * scale;
                        }
                    }
                }
                g
            })
            .collect(),
        FusionScheme::Concat => {
            let mut start = 0;
            widths
                .iter()
                .map(|&w| {
                    let g = grad_fused.column_slice(start, start + w);
                    start += w;
                    g
                })
                .collect()
        }
    }
}

fn check_latents(latents: &[Matrix], mask: &PresenceMask) -> Result<usize> {
    if latents.is_empty() {
        return Err(Error::InvalidArgument("no latents to fuse".into()));
    }
    if latents.len() != mask.views() {
        return Err(Error::shape("fuse_latents views", mask.views(), latents.len()));
    }
    let n = latents[0].rows();
    if let Some(l) = latents.iter().find(|l| l.rows() != n) {
        return Err(Error::shape("fuse_latents rows", n, l.rows()));
    }
    if mask.samples() != n {
        return Err(Error::shape("fuse_latents mask", n, mask.samples()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mean_of_identical_is_identity() {
        let v = m(&[vec![1.5, -2.0, 0.25]]);
        let fused = fuse_latents(
            &[v.clone(), v.clone(), v.clone()],
            FusionScheme::Mean,
            &PresenceMask::all_present(1, 3),
        )
        .unwrap();
        assert_eq!(fused, v);
    }

    #[test]
    fn mean_skips_missing_view() {
        let a = m(&[vec![1.0, 2.0]]);
        let b = m(&[vec![3.0, 6.0]]);
        let c = m(&[vec![100.0, 100.0]]);
        let mask = PresenceMask::new(vec![vec![true, true, false]]).unwrap();
        let fused = fuse_latents(&[a, b, c], FusionScheme::Mean, &mask).unwrap();
        assert_eq!(fused.data(), &[2.0, 4.0]);
    }

    #[test]
    fn concat_in_order() {
        let fused = fuse_latents(
            &[m(&[vec![1.0, 2.0]]), m(&[vec![3.0]])],
            FusionScheme::Concat,
            &PresenceMask::all_present(1, 2),
        )
        .unwrap();
        assert_eq!(fused.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn concat_rejects_missing_and_mean_rejects_unequal() {
        let mask = PresenceMask::new(vec![vec![true, false]]).unwrap();
        let r = fuse_latents(
            &[m(&[vec![1.0]]), m(&[vec![2.0]])],
            FusionScheme::Concat,
            &mask,
        );
        assert!(matches!(r, Err(Error::MissingView { view: 1, sample: 0 })));
        let r = fuse_latents(
            &[m(&[vec![1.0]]), m(&[vec![2.0, 3.0]])],
            FusionScheme::Mean,
            &PresenceMask::all_present(1, 2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn mask_needs_a_present_view() {
        assert!(PresenceMask::new(vec![vec![false, false]]).is_err());
    }
}
