use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use super::fusion::PresenceMask;
use super::loss::{total_loss, LossWeights};
use super::network::{ForwardTrace, Mode, Network};
use super::LayerPlan;
use crate::dataio::{MultiViewDataset, Split};
use crate::error::{Error, Result};
use crate::nncore::{adam_step, focal_loss, streams, AdamConfig, AdamState, FocalLossParams, Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_iterations: usize,
    /// Iterations without a validation improvement larger than `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
    pub focal: FocalLossParams,
    pub dropout: f64,
    pub seed: u64,
    /// Fusion head first, then one weight per view. `None` means all 1.0.
    pub loss_weights: Option<LossWeights>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iterations: 2000,
            patience: 50,
            min_delta: 1e-5,
            focal: FocalLossParams::default(),
            dropout: 0.1,
            seed: 0,
            loss_weights: None,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience >= self.max_iterations {
            return Err(Error::InvalidArgument(format!(
                "patience {} must be below max iterations {}",
                self.patience, self.max_iterations
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        self.focal.validate()?;
        self.adam.validate()
    }

    fn weights(&self, views: usize) -> Result<LossWeights> {
        let w = self
            .loss_weights
            .clone()
            .unwrap_or_else(|| LossWeights::uniform(views));
        w.check(views)?;
        Ok(w)
    }
}

/// Iteration count of the final phase: `ceil(1.2 · stopping_iteration)`.
pub fn retrain_iterations(stopping_iteration: usize) -> usize {
    (6 * stopping_iteration).div_ceil(5)
}

/// Validation plateau detector.
#[derive(Debug, Clone)]
pub struct PlateauTracker {
    patience: usize,
    min_delta: f64,
    best: Option<f64>,
    since_best: usize,
}

impl PlateauTracker {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        PlateauTracker {
            patience,
            min_delta,
            best: None,
            since_best: 0,
        }
    }

    /// Records one loss; returns true once `patience` consecutive
    /// observations failed to improve on the best by more than `min_delta`.
    pub fn observe(&mut self, loss: f64) -> bool {
        match self.best {
            Some(best) if loss >= best - self.min_delta => self.since_best += 1,
            _ => {
                self.best = Some(loss);
                self.since_best = 0;
            }
        }
        self.since_best >= self.patience
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Train split only, validation monitored.
    Select,
    /// Train + validation, fixed iteration budget.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub phase: Phase,
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub init_seed: u64,
    pub init_stream: u64,
    pub dropout_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub network: Network,
    pub dropout: f64,
    pub seeds: SeedRecord,
    pub stopping_iteration: usize,
    pub final_iterations: usize,
    pub history: Vec<HistoryEntry>,
}

impl TrainedModel {
    /// Wraps an untrained network, mostly for tests and hand-built models.
    pub fn from_network(network: Network, dropout: f64, seed: u64) -> Self {
        TrainedModel {
            network,
            dropout,
            seeds: SeedRecord {
                init_seed: seed,
                init_stream: streams::INIT,
                dropout_stream: streams::DROPOUT,
            },
            stopping_iteration: 0,
            final_iterations: 0,
            history: Vec::new(),
        }
    }

    pub fn plan(&self) -> &LayerPlan {
        &self.network.plan
    }

    pub fn forward(
        &self,
        inputs: &[Matrix],
        mask: &PresenceMask,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> Result<ForwardTrace> {
        self.network.forward(inputs, mask, mode, self.dropout, rng)
    }

    /// Eval-mode class probabilities from the fusion head.
    pub fn predict_proba(&self, inputs: &[Matrix], mask: &PresenceMask) -> Result<Matrix> {
        Ok(self.forward(inputs, mask, Mode::Eval, None)?.logits.softmax_rows())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        m.network.plan.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

struct Batch {
    inputs: Vec<Matrix>,
    labels: Vec<usize>,
    mask: PresenceMask,
}

impl Batch {
    fn from_dataset(ds: &MultiViewDataset, splits: &[Split]) -> Result<Self> {
        let idx = ds.indices(splits);
        if idx.is_empty() {
            return Err(Error::Dataset(format!("empty split {splits:?}")));
        }
        Ok(Batch {
            inputs: ds.view_inputs(&idx),
            labels: idx.iter().map(|&i| ds.labels[i]).collect(),
            mask: ds.mask.select_rows(&idx),
        })
    }
}

struct Optimizer {
    states: Vec<AdamState>,
}

impl Optimizer {
    fn new(network: &Network, cfg: AdamConfig) -> Result<Self> {
        let states = network
            .params
            .tensors()
            .iter()
            .map(|t| AdamState::new(cfg, t.rows(), t.cols()))
            .collect::<Result<_>>()?;
        Ok(Optimizer { states })
    }

    fn step(&mut self, network: &mut Network, grads: &super::Params) -> Result<()> {
        for ((p, g), s) in network
            .params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.states)
        {
            adam_step(p, g, s)?;
        }
        Ok(())
    }
}

/// One full-batch iteration; returns the training loss before the update.
fn iterate(
    network: &mut Network,
    opt: &mut Optimizer,
    batch: &Batch,
    cfg: &TrainConfig,
    weights: &LossWeights,
    rng: &mut Rng,
    iteration: usize,
) -> Result<f64> {
    let trace = network.forward(&batch.inputs, &batch.mask, Mode::Train, cfg.dropout, Some(rng))?;
    let loss = total_loss(
        &trace.logits,
        &trace.view_logits(),
        &batch.labels,
        weights,
        &cfg.focal,
        &batch.mask,
    )?;
    if !loss.value.is_finite() {
        return Err(Error::Diverged { iteration });
    }
    let grads = network.backward(
        &batch.inputs,
        &batch.mask,
        &trace,
        &loss.grad_logits,
        &loss.grad_view_logits,
    )?;
    opt.step(network, &grads).map_err(|e| match e {
        Error::NonFinite(_) => Error::Diverged { iteration },
        e => e,
    })?;
    Ok(loss.value)
}

fn eval_loss(network: &Network, batch: &Batch, focal: &FocalLossParams) -> Result<f64> {
    let trace = network.forward(&batch.inputs, &batch.mask, Mode::Eval, 0.0, None)?;
    Ok(focal_loss(&trace.logits.softmax_rows(), &batch.labels, focal)?.loss)
}

/// Full-batch Adam training with validation-plateau stopping, then a
/// from-scratch retrain on train + validation for `ceil(1.2 · T)` iterations.
pub fn train(plan: &LayerPlan, dataset: &MultiViewDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    plan.validate()?;
    dataset.check_plan(plan)?;
    let weights = cfg.weights(plan.num_views())?;
    let train_batch = Batch::from_dataset(dataset, &[Split::Train])?;
    let val_batch = Batch::from_dataset(dataset, &[Split::Val])?;

    let mut history = Vec::new();
    let mut network = Network::new(plan.clone(), cfg.seed)?;
    let mut opt = Optimizer::new(&network, cfg.adam)?;
    let mut rng = Rng::new(cfg.seed, streams::DROPOUT);
    let mut tracker = PlateauTracker::new(cfg.patience, cfg.min_delta);
    let mut stopping_iteration = cfg.max_iterations;
    for it in 1..=cfg.max_iterations {
        let train_loss = iterate(&mut network, &mut opt, &train_batch, cfg, &weights, &mut rng, it)?;
        let val_loss = eval_loss(&network, &val_batch, &cfg.focal)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        history.push(HistoryEntry {
            phase: Phase::Select,
            iteration: it,
            train_loss,
            val_loss: Some(val_loss),
        });
        if tracker.observe(val_loss) {
            stopping_iteration = it;
            break;
        }
    }
    debug!("validation plateau at iteration {stopping_iteration}");

    let final_iterations = retrain_iterations(stopping_iteration);
    let full_batch = Batch::from_dataset(dataset, &[Split::Train, Split::Val])?;
    let mut network = Network::new(plan.clone(), cfg.seed)?;
    let mut opt = Optimizer::new(&network, cfg.adam)?;
    let mut rng = Rng::new(cfg.seed, streams::DROPOUT);
    for it in 1..=final_iterations {
        let offset = stopping_iteration + it;
        let train_loss = iterate(&mut network, &mut opt, &full_batch, cfg, &weights, &mut rng, offset)?;
        history.push(HistoryEntry {
            phase: Phase::Final,
            iteration: it,
            train_loss,
            val_loss: None,
        });
    }

    Ok(TrainedModel {
        network,
        dropout: cfg.dropout,
        seeds: SeedRecord {
            init_seed: cfg.seed,
            init_stream: streams::INIT,
            dropout_stream: streams::DROPOUT,
        },
        stopping_iteration,
        final_iterations,
        history,
    })
}
