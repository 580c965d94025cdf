use serde::{Deserialize, Serialize};

use super::fusion::{fuse_latents, unfuse_gradient, PresenceMask};
use super::LayerPlan;
use crate::error::{Error, Result};
use crate::nncore::{streams, Matrix, Rng};

/// Affine layer `z = x·W + b` with `W` stored `(in × out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Matrix::zeros(input, output),
            bias: Matrix::zeros(1, output),
        }
    }

    /// Fan-in scaled uniform weights, bound `sqrt(6 / fan_in)`, zero bias.
    ///
    /// Each input row draws from its own sub-stream, so growing the layer
    /// (more inputs or outputs) keeps the existing weights' draws.
    fn init(input: usize, output: usize, layer_rng: &Rng) -> Self {
        let bound = (6.0 / input as f64).sqrt();
        let mut weight = Matrix::zeros(input, output);
        for i in 0..input {
            let mut r = layer_rng.fork(i as u64);
            for w in weight.row_mut(i) {
                *w = r.uniform_in(-bound, bound);
            }
        }
        Dense {
            weight,
            bias: Matrix::zeros(1, output),
        }
    }

    pub fn input(&self) -> usize {
        self.weight.rows()
    }

    pub fn output(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.weight)?;
        z.add_row_broadcast(self.bias.data())?;
        Ok(z)
    }

    /// Accumulates parameter gradients and returns the input gradient
    /// when `need_input` is set.
    fn backward(
        &self,
        x: &Matrix,
        grad_z: &Matrix,
        grads: &mut Dense,
        need_input: bool,
    ) -> Result<Option<Matrix>> {
        grads.weight.add_assign(&x.transposed_matmul(grad_z)?)?;
        let bsum = grad_z.column_sums();
        for (b, g) in grads.bias.data_mut().iter_mut().zip(bsum) {
            *b += g;
        }
        if need_input {
            Ok(Some(grad_z.matmul_transposed(&self.weight)?))
        } else {
            Ok(None)
        }
    }
}

/// One marginal network plus its per-view prediction head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalNet {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub embedding: Dense,
    pub head: Dense,
}

/// All trainable parameters, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub views: Vec<MarginalNet>,
    pub fusion_hidden: Dense,
    pub output: Dense,
}

const LAYERS_PER_VIEW: u64 = 8;

impl Params {
    /// Seeded initialization; each layer owns a sub-stream of `(seed, INIT)`.
    pub fn init(plan: &LayerPlan, seed: u64) -> Result<Self> {
        plan.validate()?;
        let root = Rng::new(seed, streams::INIT);
        let views = plan
            .views
            .iter()
            .enumerate()
            .map(|(v, l)| {
                let base = v as u64 * LAYERS_PER_VIEW;
                MarginalNet {
                    hidden1: Dense::init(l.input, l.hidden1, &root.fork(base)),
                    hidden2: Dense::init(l.hidden1, l.hidden2, &root.fork(base + 1)),
                    embedding: Dense::init(l.hidden2, l.embedding, &root.fork(base + 2)),
                    head: Dense::init(l.embedding, plan.classes, &root.fork(base + 3)),
                }
            })
            .collect();
        let tail = 1 << 32;
        Ok(Params {
            views,
            fusion_hidden: Dense::init(plan.fused_width(), plan.fusion_hidden, &root.fork(tail)),
            output: Dense::init(plan.fusion_hidden, plan.classes, &root.fork(tail + 1)),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.input(), d.output());
        Params {
            views: self
                .views
                .iter()
                .map(|m| MarginalNet {
                    hidden1: z(&m.hidden1),
                    hidden2: z(&m.hidden2),
                    embedding: z(&m.embedding),
                    head: z(&m.head),
                })
                .collect(),
            fusion_hidden: z(&self.fusion_hidden),
            output: z(&self.output),
        }
    }

    fn layers(&self) -> Vec<&Dense> {
        let mut out = Vec::with_capacity(self.views.len() * 4 + 2);
        for m in &self.views {
            out.extend([&m.hidden1, &m.hidden2, &m.embedding, &m.head]);
        }
        out.push(&self.fusion_hidden);
        out.push(&self.output);
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut out = Vec::with_capacity(self.views.len() * 4 + 2);
        for m in &mut self.views {
            out.push(&mut m.hidden1);
            out.push(&mut m.hidden2);
            out.push(&mut m.embedding);
            out.push(&mut m.head);
        }
        out.push(&mut self.fusion_hidden);
        out.push(&mut self.output);
        out
    }

    /// Weight and bias matrices in canonical order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers()
            .into_iter()
            .flat_map(|d| [&d.weight, &d.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers_mut()
            .into_iter()
            .flat_map(|d| [&mut d.weight, &mut d.bias])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for t in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::shape("Params::set_flat", self.len(), flat.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.data().len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activations of one marginal network.
#[derive(Debug, Clone)]
pub struct ViewTrace {
    pub z1: Matrix,
    pub a1: Matrix,
    pub drop1: Option<Matrix>,
    pub z2: Matrix,
    pub a2: Matrix,
    pub drop2: Option<Matrix>,
    pub embedding: Matrix,
    pub logits: Matrix,
}

/// Everything a forward pass produced, kept for backprop and attribution.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub views: Vec<ViewTrace>,
    pub fused: Matrix,
    pub zf: Matrix,
    pub af: Matrix,
    pub dropf: Option<Matrix>,
    pub logits: Matrix,
}

impl ForwardTrace {
    pub fn view_logits(&self) -> Vec<&Matrix> {
        self.views.iter().map(|v| &v.logits).collect()
    }

    /// Every ReLU pre-activation, in a fixed order.
    pub fn preactivations(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for v in &self.views {
            out.extend_from_slice(v.z1.data());
            out.extend_from_slice(v.z2.data());
        }
        out.extend_from_slice(self.zf.data());
        out
    }
}

/// Layer plan plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub plan: LayerPlan,
    pub params: Params,
}

fn relu(z: &Matrix) -> Matrix {
    z.map(|v| v.max(0.0))
}

/// Inverted-dropout scale mask: 0 with probability `rate`, else 1/(1-rate).
fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = if rng.bernoulli(rate) { 0.0 } else { keep };
    }
    m
}

fn apply_dropout(
    a: Matrix,
    mode: Mode,
    rate: f64,
    rng: &mut Option<&mut Rng>,
) -> Result<(Matrix, Option<Matrix>)> {
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((a, None));
    }
    let rng = rng
        .as_deref_mut()
        .ok_or_else(|| Error::InvalidArgument("train mode with dropout needs an rng".into()))?;
    let mask = dropout_mask(a.rows(), a.cols(), rate, rng);
    let dropped = a.zip_map(&mask, |x, m| x * m)?;
    Ok((dropped, Some(mask)))
}

impl Network {
    pub fn new(plan: LayerPlan, seed: u64) -> Result<Self> {
        let params = Params::init(&plan, seed)?;
        Ok(Network { plan, params })
    }

    pub fn check_inputs(&self, inputs: &[Matrix], mask: &PresenceMask) -> Result<usize> {
        if inputs.len() != self.plan.num_views() {
            return Err(Error::shape(
                "forward views",
                self.plan.num_views(),
                inputs.len(),
            ));
        }
        let n = inputs[0].rows();
        for (v, (x, l)) in inputs.iter().zip(&self.plan.views).enumerate() {
            if x.rows() != n {
                return Err(Error::shape("forward rows", n, format!("{} in view {v}", x.rows())));
            }
            if x.cols() != l.input {
                return Err(Error::shape(
                    "forward input dim",
                    l.input,
                    format!("{} in view {v}", x.cols()),
                ));
            }
        }
        if mask.samples() != n || mask.views() != inputs.len() {
            return Err(Error::shape(
                "forward mask",
                format!("{n}x{}", inputs.len()),
                format!("{}x{}", mask.samples(), mask.views()),
            ));
        }
        Ok(n)
    }

    /// Forward pass. `rng` is consumed only in train mode with dropout > 0.
    pub fn forward(
        &self,
        inputs: &[Matrix],
        mask: &PresenceMask,
        mode: Mode,
        dropout: f64,
        mut rng: Option<&mut Rng>,
    ) -> Result<ForwardTrace> {
        self.check_inputs(inputs, mask)?;
        let mut views = Vec::with_capacity(inputs.len());
        for (x, net) in inputs.iter().zip(&self.params.views) {
            let z1 = net.hidden1.forward(x)?;
            let (a1, drop1) = apply_dropout(relu(&z1), mode, dropout, &mut rng)?;
            let z2 = net.hidden2.forward(&a1)?;
            let (a2, drop2) = apply_dropout(relu(&z2), mode, dropout, &mut rng)?;
            let embedding = net.embedding.forward(&a2)?;
            let logits = net.head.forward(&embedding)?;
            views.push(ViewTrace {
                z1,
                a1,
                drop1,
                z2,
                a2,
                drop2,
                embedding,
                logits,
            });
        }
        let latents: Vec<Matrix> = views.iter().map(|v| v.embedding.clone()).collect();
        let fused = fuse_latents(&latents, self.plan.fusion, mask)?;
        let zf = self.params.fusion_hidden.forward(&fused)?;
        let (af, dropf) = apply_dropout(relu(&zf), mode, dropout, &mut rng)?;
        let logits = self.params.output.forward(&af)?;
        Ok(ForwardTrace {
            views,
            fused,
            zf,
            af,
            dropf,
            logits,
        })
    }

    /// Gradients of a loss given its gradients w.r.t. the fused logits and
    /// each view head's logits.
    pub fn backward(
        &self,
        inputs: &[Matrix],
        mask: &PresenceMask,
        trace: &ForwardTrace,
        grad_logits: &Matrix,
        grad_view_logits: &[Matrix],
    ) -> Result<Params> {
        let mut grads = self.params.zeros_like();
        let p = &self.params;

        let d_af = p
            .output
            .backward(&trace.af, grad_logits, &mut grads.output, true)?
            .expect("input gradient requested");
        let d_zf = relu_backward(&d_af, &trace.zf, trace.dropf.as_ref())?;
        let d_fused = p
            .fusion_hidden
            .backward(&trace.fused, &d_zf, &mut grads.fusion_hidden, true)?
            .expect("input gradient requested");
        let widths: Vec<usize> = self.plan.views.iter().map(|l| l.embedding).collect();
        let d_embeddings = unfuse_gradient(&d_fused, &widths, self.plan.fusion, mask);

        for (v, ((net, g), t)) in p
            .views
            .iter()
            .zip(grads.views.iter_mut())
            .zip(&trace.views)
            .enumerate()
        {
            let mut d_emb = d_embeddings[v].clone();
            let d_from_head = net
                .head
                .backward(&t.embedding, &grad_view_logits[v], &mut g.head, true)?
                .expect("input gradient requested");
            d_emb.add_assign(&d_from_head)?;
            let d_a2 = net
                .embedding
                .backward(&t.a2, &d_emb, &mut g.embedding, true)?
                .expect("input gradient requested");
            let d_z2 = relu_backward(&d_a2, &t.z2, t.drop2.as_ref())?;
            let d_a1 = net
                .hidden2
                .backward(&t.a1, &d_z2, &mut g.hidden2, true)?
                .expect("input gradient requested");
            let d_z1 = relu_backward(&d_a1, &t.z1, t.drop1.as_ref())?;
            net.hidden1.backward(&inputs[v], &d_z1, &mut g.hidden1, false)?;
        }
        Ok(grads)
    }
}

fn relu_backward(grad_a: &Matrix, z: &Matrix, drop: Option<&Matrix>) -> Result<Matrix> {
    let mut g = grad_a.zip_map(z, |g, z| if z > 0.0 { g } else { 0.0 })?;
    if let Some(d) = drop {
        g = g.zip_map(d, |g, m| g * m)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiview::{FusionScheme, ViewLayers};

    fn plan() -> LayerPlan {
        LayerPlan {
            views: vec![ViewLayers::new(4, 5, 3, 2), ViewLayers::new(6, 3, 4, 2)],
            fusion: FusionScheme::Mean,
            fusion_hidden: 3,
            classes: 3,
        }
    }

    #[test]
    fn init_is_seeded_and_biases_zero() {
        let a = Params::init(&plan(), 11).unwrap();
        let b = Params::init(&plan(), 11).unwrap();
        let c = Params::init(&plan(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.views[0].hidden1.bias.data().iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / 4.0).sqrt();
        assert!(a.views[0]
            .hidden1
            .weight
            .data()
            .iter()
            .all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_prefix_stable_when_input_grows() {
        let mut wide = plan();
        wide.views[0].input = 9;
        let a = Params::init(&plan(), 5).unwrap();
        let b = Params::init(&wide, 5).unwrap();
        let scale = (4.0f64 / 9.0).sqrt();
        for i in 0..4 {
            for (x, y) in a.views[0]
                .hidden1
                .weight
                .row(i)
                .iter()
                .zip(b.views[0].hidden1.weight.row(i))
            {
                assert!((x * scale - y).abs() < 1e-12);
            }
        }
        assert_eq!(a.views[1], b.views[1]);
    }

    #[test]
    fn flatten_round_trip() {
        let mut p = Params::init(&plan(), 1).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), p.len());
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        p.set_flat(&doubled).unwrap();
        assert_eq!(p.flatten(), doubled);
        assert!(p.set_flat(&flat[1..]).is_err());
    }

    #[test]
    fn train_mode_needs_rng_only_with_dropout() {
        let net = Network::new(plan(), 3).unwrap();
        let x = vec![Matrix::filled(2, 4, 0.5), Matrix::filled(2, 6, -0.5)];
        let mask = PresenceMask::all_present(2, 2);
        assert!(net.forward(&x, &mask, Mode::Train, 0.1, None).is_err());
        assert!(net.forward(&x, &mask, Mode::Train, 0.0, None).is_ok());
        assert!(net.forward(&x, &mask, Mode::Eval, 0.1, None).is_ok());
    }
}
