#![allow(dead_code)]

use shapaudit::downstream::Merge;
use shapaudit::multiview::{
    total_loss, FusionScheme, LayerPlan, LossWeights, Mode, Network, PresenceMask, ViewLayers,
};
use shapaudit::nncore::{FocalLossParams, GradCheckReport, Matrix, Probe, Rng};

/// Random plan with 2-3 views, every width in `[2, max_width]`.
pub fn random_plan(rng: &mut Rng, fusion: FusionScheme, max_width: usize) -> LayerPlan {
    let views = 2 + rng.below(2);
    let mut w = |lo: usize| lo + rng.below(max_width - lo + 1);
    let shared_embedding = w(2);
    let layers = (0..views)
        .map(|_| {
            let embedding = match fusion {
                FusionScheme::Mean => shared_embedding,
                FusionScheme::Concat => w(2),
            };
            ViewLayers::new(w(2), w(2), w(2), embedding)
        })
        .collect();
    LayerPlan {
        views: layers,
        fusion,
        fusion_hidden: w(2),
        classes: w(2).min(4),
    }
}

/// Seeded network whose biases are also randomized.
pub fn random_network(plan: &LayerPlan, seed: u64) -> Network {
    let mut net = Network::new(plan.clone(), seed).unwrap();
    let mut rng = Rng::new(seed, 99);
    for (i, t) in net.params.tensors_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            for b in t.data_mut() {
                *b = rng.uniform_in(-0.5, 0.5);
            }
        }
    }
    net
}

pub fn random_inputs(rng: &mut Rng, plan: &LayerPlan, n: usize) -> Vec<Matrix> {
    plan.views
        .iter()
        .map(|l| {
            let data = (0..n * l.input).map(|_| rng.standard_normal()).collect();
            Matrix::from_vec(n, l.input, data).unwrap()
        })
        .collect()
}

/// Focal multi-head loss gradient check over every parameter, dropout off.
pub fn check_network_gradient(
    net: &Network,
    inputs: &[Matrix],
    mask: &PresenceMask,
    labels: &[usize],
    h: f64,
) -> GradCheckReport {
    let weights = LossWeights::uniform(net.plan.num_views());
    let focal = FocalLossParams::default();
    let trace = net.forward(inputs, mask, Mode::Eval, 0.0, None).unwrap();
    let loss = total_loss(&trace.logits, &trace.view_logits(), labels, &weights, &focal, mask).unwrap();
    let grads = net
        .backward(inputs, mask, &trace, &loss.grad_logits, &loss.grad_view_logits)
        .unwrap();
    let theta = net.params.flatten();
    let mut probe_net = net.clone();
    let f = |flat: &[f64]| {
        probe_net.params.set_flat(flat)?;
        let t = probe_net.forward(inputs, mask, Mode::Eval, 0.0, None)?;
        let l = total_loss(&t.logits, &t.view_logits(), labels, &weights, &focal, mask)?;
        Ok(Probe {
            value: l.value,
            preactivations: t.preactivations(),
        })
    };
    shapaudit::nncore::gradient_check(f, &theta, &grads.flatten(), h).unwrap()
}

/// Raises every ReLU bias until all pre-activations over `batches` are at
/// least 1, making the network affine on those inputs.
pub fn make_affine_on(net: &mut Network, batches: &[&[Matrix]]) {
    let views = net.plan.num_views();
    for stage in 0..3 {
        let mut mins: Vec<Vec<f64>> = Vec::new();
        for inputs in batches {
            let mask = PresenceMask::all_present(inputs[0].rows(), views);
            let t = net.forward(inputs, &mask, Mode::Eval, 0.0, None).unwrap();
            let zs: Vec<&Matrix> = match stage {
                0 => t.views.iter().map(|v| &v.z1).collect(),
                1 => t.views.iter().map(|v| &v.z2).collect(),
                _ => vec![&t.zf],
            };
            if mins.is_empty() {
                mins = zs.iter().map(|z| vec![f64::INFINITY; z.cols()]).collect();
            }
            for (m, z) in mins.iter_mut().zip(zs) {
                for r in 0..z.rows() {
                    for (mj, &zj) in m.iter_mut().zip(z.row(r)) {
                        *mj = mj.min(zj);
                    }
                }
            }
        }
        let biases: Vec<&mut Matrix> = match stage {
            0 => net.params.views.iter_mut().map(|v| &mut v.hidden1.bias).collect(),
            1 => net.params.views.iter_mut().map(|v| &mut v.hidden2.bias).collect(),
            _ => vec![&mut net.params.fusion_hidden.bias],
        };
        for (b, m) in biases.into_iter().zip(&mins) {
            for (bj, &mj) in b.data_mut().iter_mut().zip(m) {
                if mj < 1.0 {
                    *bj += 1.0 - mj;
                }
            }
        }
    }
}

/// Input-to-logit matrix of view `v` for a network that is affine on the
/// inputs of interest (all views present).
pub fn effective_weight(net: &Network, v: usize) -> Matrix {
    let p = &net.params;
    let mv = &p.views[v];
    let mut w = mv
        .hidden1
        .weight
        .matmul(&mv.hidden2.weight)
        .unwrap()
        .matmul(&mv.embedding.weight)
        .unwrap();
    let fh = &p.fusion_hidden.weight;
    let slice = match net.plan.fusion {
        FusionScheme::Mean => {
            let mut s = fh.clone();
            s.scale(1.0 / net.plan.num_views() as f64);
            s
        }
        FusionScheme::Concat => {
            let start: usize = net.plan.views[..v].iter().map(|l| l.embedding).sum();
            let rows: Vec<usize> = (start..start + net.plan.views[v].embedding).collect();
            fh.select_rows(&rows)
        }
    };
    w = w.matmul(&slice).unwrap();
    w.matmul(&p.output.weight).unwrap()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Direct O(n²) weighted tau with additive hyperbolic weights, averaged over
/// both reference directions.
pub fn brute_tau(a: &[f64], b: &[f64]) -> f64 {
    let directional = |reference: &[f64]| {
        let ranks = shapaudit::rankstats::descending_ranks(reference);
        let h = |i: usize| 1.0 / (1.0 + ranks[i] as f64);
        let (mut num, mut wa, mut wb) = (0.0, 0.0, 0.0);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let w = h(i) + h(j);
                let (sa, sb) = (sign(a[i] - a[j]), sign(b[i] - b[j]));
                num += w * sa * sb;
                if sa != 0.0 {
                    wa += w;
                }
                if sb != 0.0 {
                    wb += w;
                }
            }
        }
        num / (wa.sqrt() * wb.sqrt())
    };
    0.5 * (directional(a) + directional(b))
}

/// Ward merges recomputed from cluster centroids at every step.
pub fn brute_ward(x: &Matrix) -> Vec<Merge> {
    let n = x.rows();
    let d = x.cols();
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let centroid = |m: &[usize]| {
        let mut c = vec![0.0; d];
        for &i in m {
            for (cj, &v) in c.iter_mut().zip(x.row(i)) {
                *cj += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= m.len() as f64);
        c
    };
    let mut merges = Vec::new();
    for _ in 1..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            let Some(ma) = &clusters[a] else { continue };
            for b in a + 1..n {
                let Some(mb) = &clusters[b] else { continue };
                let (ca, cb) = (centroid(ma), centroid(mb));
                let dist: f64 = ca.iter().zip(&cb).map(|(p, q)| (p - q) * (p - q)).sum();
                let (na, nb) = (ma.len() as f64, mb.len() as f64);
                let cost = 2.0 * na * nb / (na + nb) * dist;
                if best.is_none_or(|(_, _, c)| cost < c) {
                    best = Some((a, b, cost));
                }
            }
        }
        let (a, b, cost) = best.unwrap();
        let mb = clusters[b].take().unwrap();
        let ma = clusters[a].as_mut().unwrap();
        ma.extend(mb);
        merges.push(Merge {
            a,
            b,
            cost,
            size: ma.len(),
        });
    }
    merges
}

/// Fraction of (positive, negative) pairs ordered correctly, ties count half.
pub fn brute_auc(positive: &[bool], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Scores with roughly `tie_fraction` of entries collapsed onto a few values.
pub fn random_scores(rng: &mut Rng, n: usize, tie_fraction: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.bernoulli(tie_fraction) {
                rng.below(4) as f64 * 0.25
            } else {
                rng.standard_normal()
            }
        })
        .collect()
}
