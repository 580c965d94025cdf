//! DeepSHAP for the multi-view network.
//!
//! For every (sample, reference) pair the network is run on both inputs and
//! DeepLIFT multipliers are chained from each class logit back to the
//! inputs: affine layers pass their weights through unchanged (linear rule),
//! each ReLU contributes `(relu(z_x) - relu(z_b)) / (z_x - z_b)` (rescale
//! rule), mean fusion splits the multiplier evenly over the views and concat
//! fusion routes each slice to its view. Attributions are
//! `multiplier · (x - b)`, averaged over the background set, so for every
//! sample and class they sum to `f_c(x) - mean_b f_c(b)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiview::{FusionScheme, Mode, PresenceMask, TrainedModel};
use crate::nncore::{Matrix, Rng};

/// Below this pre-activation difference the rescale rule falls back to the
/// ReLU derivative at the sample.
pub const RESCALE_EPS: f64 = 1e-9;

/// Reference inputs, one matrix per view with equal row counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    views: Vec<Matrix>,
}

impl BackgroundSet {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        let rows = views.first().map_or(0, Matrix::rows);
        if rows == 0 {
            return Err(Error::InvalidArgument("background set is empty".into()));
        }
        if let Some(v) = views.iter().find(|v| v.rows() != rows) {
            return Err(Error::shape("background rows", rows, v.rows()));
        }
        Ok(BackgroundSet { views })
    }

    /// At most `k` rows drawn without replacement, kept in ascending order.
    pub fn subsample(views: &[Matrix], k: usize, rng: &mut Rng) -> Result<Self> {
        let n = views.first().map_or(0, Matrix::rows);
        let mut idx = rng.sample_indices(n, k);
        idx.sort_unstable();
        BackgroundSet::new(views.iter().map(|v| v.select_rows(&idx)).collect())
    }

    pub fn len(&self) -> usize {
        self.views[0].rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }
}

/// DeepSHAP values for a batch of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub samples: usize,
    pub classes: usize,
    /// Per view, `(samples·classes) × features` with row `sample·classes + class`.
    pub phi: Vec<Matrix>,
    /// `f_c(x) - mean_b f_c(b)`, `samples × classes`.
    pub deltas: Matrix,
    pub feature_names: Vec<Vec<String>>,
}

impl AttributionResult {
    #[inline]
    pub fn phi(&self, sample: usize, class: usize, view: usize, feature: usize) -> f64 {
        self.phi[view].get(sample * self.classes + class, feature)
    }

    /// Σ over all views and features for one (sample, class).
    pub fn total(&self, sample: usize, class: usize) -> f64 {
        let row = sample * self.classes + class;
        self.phi
            .iter()
            .map(|m| m.row(row).iter().sum::<f64>())
            .sum()
    }

    pub fn num_views(&self) -> usize {
        self.phi.len()
    }

    pub fn with_feature_names(mut self, names: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != self.phi.len()
            || names.iter().zip(&self.phi).any(|(n, m)| n.len() != m.cols())
        {
            return Err(Error::InvalidArgument("feature names do not match views".into()));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Feature names of a universe, in universe order.
    pub fn universe_names(&self, universe: Universe) -> Result<Vec<String>> {
        match universe {
            Universe::View(v) => self
                .feature_names
                .get(v)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no view {v}"))),
            Universe::Pooled => Ok(self.feature_names.concat()),
        }
    }

    /// Long-form export: `sample_id,class,view,feature,phi`.
    pub fn write_csv(&self, path: &Path, sample_ids: &[String], class_names: &[String], view_ids: &[String]) -> Result<()> {
        if sample_ids.len() != self.samples || class_names.len() != self.classes || view_ids.len() != self.phi.len() {
            return Err(Error::InvalidArgument("export labels do not match result".into()));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sample_id", "class", "view", "feature", "phi"])?;
        for (s, sid) in sample_ids.iter().enumerate() {
            for (c, cname) in class_names.iter().enumerate() {
                for (v, vid) in view_ids.iter().enumerate() {
                    for (f, fname) in self.feature_names[v].iter().enumerate() {
                        let value = format!("{:?}", self.phi(s, c, v, f));
                        w.write_record([sid.as_str(), cname.as_str(), vid.as_str(), fname.as_str(), value.as_str()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Which features a score vector or ranking covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Universe {
    View(usize),
    Pooled,
}

struct LayerT {
    /// `Wᵀ`, `(out × in)`, so that input multipliers are `G · Wᵀ` with a
    /// row-major product.
    wt: Matrix,
}

struct ViewT {
    hidden1: LayerT,
    hidden2: LayerT,
    embedding: LayerT,
}

fn rescale(zx: &Matrix, zb: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(zx.rows(), zx.cols());
    for r in 0..zx.rows() {
        for ((o, &x), &b) in m.row_mut(r).iter_mut().zip(zx.row(r)).zip(zb) {
            let dz = x - b;
            *o = if dz.abs() < RESCALE_EPS {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (x.max(0.0) - b.max(0.0)) / dz
            };
        }
    }
    m
}

/// Repeats each row `classes` times (sample-major) and multiplies elementwise.
fn gate(g: &Matrix, m: &Matrix, classes: usize) -> Matrix {
    let mut out = g.clone();
    for r in 0..g.rows() {
        let mrow = m.row(r / classes);
        for (o, &x) in out.row_mut(r).iter_mut().zip(mrow) {
            *o *= x;
        }
    }
    out
}

/// DeepSHAP attributions of every class logit for `samples`.
pub fn deepshap_attribute(
    model: &TrainedModel,
    samples: &[Matrix],
    background: &BackgroundSet,
) -> Result<AttributionResult> {
    let net = &model.network;
    let plan = &net.plan;
    let n = net.check_inputs(samples, &PresenceMask::all_present(samples[0].rows(), samples.len()))?;
    if n == 0 {
        return Err(Error::InvalidArgument("no samples to attribute".into()));
    }
    net.check_inputs(
        background.views(),
        &PresenceMask::all_present(background.len(), background.views().len()),
    )?;
    let classes = plan.classes;

    let t = |w: &Matrix| LayerT { wt: w.transpose() };
    let views_t: Vec<ViewT> = net
        .params
        .views
        .iter()
        .map(|v| ViewT {
            hidden1: t(&v.hidden1.weight),
            hidden2: t(&v.hidden2.weight),
            embedding: t(&v.embedding.weight),
        })
        .collect();
    let fusion_t = t(&net.params.fusion_hidden.weight);

    let bg_mask = PresenceMask::all_present(background.len(), plan.num_views());
    let bg = net.forward(background.views(), &bg_mask, Mode::Eval, 0.0, None)?;
    let bg_mean_logits = bg.logits.column_means();

    // Seed multipliers at the fusion head's hidden layer: d logit_c / d af = W_out[:, c].
    let out_w = &net.params.output.weight;
    let n_bg = background.len();
    let widths: Vec<usize> = plan.views.iter().map(|l| l.embedding).collect();

    // Rows are independent, so chunking samples across threads leaves every
    // per-row reduction order unchanged.
    const CHUNK: usize = 8;
    let chunks: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(CHUNK)
        .map(<[usize]>::to_vec)
        .collect();
    let parts: Vec<Result<(Vec<Matrix>, Matrix)>> = chunks
        .par_iter()
        .map(|idx| {
            let xs: Vec<Matrix> = samples.iter().map(|m| m.select_rows(idx)).collect();
            let m = idx.len();
            let tx = net.forward(&xs, &PresenceMask::all_present(m, xs.len()), Mode::Eval, 0.0, None)?;
            let mut phi: Vec<Matrix> = plan
                .views
                .iter()
                .map(|l| Matrix::zeros(m * classes, l.input))
                .collect();
            let mut seed = Matrix::zeros(m * classes, plan.fusion_hidden);
            for r in 0..m * classes {
                let c = r % classes;
                for (j, o) in seed.row_mut(r).iter_mut().enumerate() {
                    *o = out_w.get(j, c);
                }
            }
            for b in 0..n_bg {
                let mf = rescale(&tx.zf, bg.zf.row(b));
                let g_zf = gate(&seed, &mf, classes);
                let g_fused = g_zf.matmul(&fusion_t.wt)?;
                let mut start = 0;
                for (v, vt) in views_t.iter().enumerate() {
                    let g_emb = match plan.fusion {
                        FusionScheme::Mean => {
                            let mut g = g_fused.clone();
                            g.scale(1.0 / plan.num_views() as f64);
                            g
                        }
                        FusionScheme::Concat => g_fused.column_slice(start, start + widths[v]),
                    };
                    start += widths[v];
                    let g_a2 = g_emb.matmul(&vt.embedding.wt)?;
                    let g_z2 = gate(&g_a2, &rescale(&tx.views[v].z2, bg.views[v].z2.row(b)), classes);
                    let g_a1 = g_z2.matmul(&vt.hidden2.wt)?;
                    let g_z1 = gate(&g_a1, &rescale(&tx.views[v].z1, bg.views[v].z1.row(b)), classes);
                    let g_x = g_z1.matmul(&vt.hidden1.wt)?;
                    let bref = background.views()[v].row(b);
                    let target = &mut phi[v];
                    for r in 0..m * classes {
                        let x = xs[v].row(r / classes);
                        for (((o, &g), &xi), &bi) in target.row_mut(r).iter_mut().zip(g_x.row(r)).zip(x).zip(bref) {
                            *o += g * (xi - bi);
                        }
                    }
                }
            }
            let inv = 1.0 / n_bg as f64;
            for p in &mut phi {
                p.scale(inv);
            }
            let mut deltas = Matrix::zeros(m, classes);
            for s in 0..m {
                for (c, mean) in bg_mean_logits.iter().enumerate() {
                    deltas.set(s, c, tx.logits.get(s, c) - mean);
                }
            }
            Ok((phi, deltas))
        })
        .collect();

    let mut phi_blocks: Vec<Vec<Matrix>> = vec![Vec::new(); plan.num_views()];
    let mut delta_blocks = Vec::new();
    for part in parts {
        let (phi, deltas) = part?;
        for (v, p) in phi.into_iter().enumerate() {
            phi_blocks[v].push(p);
        }
        delta_blocks.push(deltas);
    }
    let phi = phi_blocks
        .iter()
        .map(|blocks| Matrix::vconcat(&blocks.iter().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let deltas = Matrix::vconcat(&delta_blocks.iter().collect::<Vec<_>>())?;
    let feature_names = plan
        .views
        .iter()
        .enumerate()
        .map(|(v, l)| (0..l.input).map(|f| format!("v{v}_f{f}")).collect())
        .collect();
    Ok(AttributionResult {
        samples: n,
        classes,
        phi,
        deltas,
        feature_names,
    })
}

/// Mean of `|phi|` over samples and classes, per feature of `universe`.
pub fn aggregate_scores(result: &AttributionResult, universe: Universe) -> Result<Vec<f64>> {
    if result.samples == 0 {
        return Err(Error::InvalidArgument("no samples to aggregate".into()));
    }
    let views: Vec<usize> = match universe {
        Universe::View(v) if v < result.num_views() => vec![v],
        Universe::View(v) => return Err(Error::InvalidArgument(format!("no view {v}"))),
        Universe::Pooled => (0..result.num_views()).collect(),
    };
    let denom = (result.samples * result.classes) as f64;
    let mut out = Vec::new();
    for v in views {
        let m = &result.phi[v];
        let mut sums = vec![0.0; m.cols()];
        for r in 0..m.rows() {
            for (s, x) in sums.iter_mut().zip(m.row(r)) {
                *s += x.abs();
            }
        }
        out.extend(sums.into_iter().map(|s| s / denom));
    }
    Ok(out)
}

/// Ordinal ranking of features, 1 = highest score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    /// 1-based; ties broken by ascending feature index.
    pub ranks: Vec<usize>,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Feature indices from best to worst.
    pub fn order(&self) -> Vec<usize> {
        let mut idx = vec![0; self.ranks.len()];
        for (f, &r) in self.ranks.iter().enumerate() {
            idx[r - 1] = f;
        }
        idx
    }
}

pub fn rank_features(scores: &[f64], features: Vec<String>) -> Result<RankVector> {
    if features.len() != scores.len() {
        return Err(Error::shape("rank_features names", scores.len(), features.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("rank_features scores".into()));
    }
    let ranks = crate::rankstats::descending_ranks(scores)
        .into_iter()
        .map(|r| r + 1)
        .collect();
    Ok(RankVector {
        features,
        scores: scores.to_vec(),
        ranks,
    })
}

/// JSON summary of aggregated scores and ranks for one universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub universe: Universe,
    pub samples: usize,
    pub classes: usize,
    pub backgrounds: usize,
    pub ranking: RankVector,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_features(&[0.5, 2.0, 1.0], names(3)).unwrap().ranks, vec![3, 1, 2]);
        assert_eq!(rank_features(&[1.0; 4], names(4)).unwrap().ranks, vec![1, 2, 3, 4]);
        assert_eq!(rank_features(&[2.0, 2.0, 1.0], names(3)).unwrap().ranks, vec![1, 2, 3]);
        assert!(rank_features(&[f64::NAN, 1.0], names(2)).is_err());
        let r = rank_features(&[0.5, 2.0, 1.0], names(3)).unwrap();
        assert_eq!(r.order(), vec![1, 2, 0]);
    }

    fn result_from(rows: &[Vec<f64>]) -> AttributionResult {
        let phi = Matrix::from_rows(rows).unwrap();
        AttributionResult {
            samples: rows.len(),
            classes: 1,
            deltas: Matrix::zeros(rows.len(), 1),
            feature_names: vec![names(phi.cols())],
            phi: vec![phi],
        }
    }

    #[test]
    fn aggregate_examples() {
        let r = result_from(&[vec![1.0, -2.0], vec![3.0, -4.0]]);
        assert_eq!(aggregate_scores(&r, Universe::Pooled).unwrap(), vec![2.0, 3.0]);
        let z = result_from(&[vec![0.0, 0.0]]);
        assert_eq!(aggregate_scores(&z, Universe::View(0)).unwrap(), vec![0.0, 0.0]);
        let one = result_from(&[vec![-0.5, 0.25]]);
        assert_eq!(aggregate_scores(&one, Universe::Pooled).unwrap(), vec![0.5, 0.25]);
        assert!(aggregate_scores(&one, Universe::View(1)).is_err());
    }

    #[test]
    fn rescale_rule_and_fallback() {
        let zx = Matrix::from_rows(&[vec![2.0, -1.0, 0.5, 3.0]]).unwrap();
        let m = rescale(&zx, &[-2.0, -3.0, 0.5, 1.0]);
        assert_eq!(m.data(), &[0.5, 0.0, 1.0, 1.0]);
        let m = rescale(&Matrix::from_rows(&[vec![-0.5]]).unwrap(), &[-0.5]);
        assert_eq!(m.data(), &[0.0]);
    }

    #[test]
    fn empty_background_rejected() {
        assert!(BackgroundSet::new(vec![Matrix::zeros(0, 3)]).is_err());
        assert!(BackgroundSet::new(vec![Matrix::zeros(2, 3), Matrix::zeros(1, 3)]).is_err());
    }
}
