use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.lr > 0.0 && self.lr.is_finite())
            || !unit(self.beta1)
            || !unit(self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::InvalidArgument(format!("invalid Adam config {self:?}")));
        }
        Ok(())
    }
}

/// Moment accumulators for one parameter matrix.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Matrix,
    v: Matrix,
}

impl AdamState {
    pub fn new(config: AdamConfig, rows: usize, cols: usize) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            step: 0,
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut Matrix, grads: &Matrix, state: &mut AdamState) -> Result<()> {
    params.check_same_shape(grads, "adam_step grads")?;
    params.check_same_shape(&state.m, "adam_step state")?;
    grads.ensure_finite("adam_step gradient")?;

    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let p = params.data_mut();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (i, &g) in grads.data().iter().enumerate() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}
