use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, flat in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n_parameters();
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let g = grads.flatten();
    if g.len() != state.m.len() || g.len() != params.n_parameters() {
        return Err(invalid("optimizer state does not match the parameters"));
    }
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let mut offset = 0;
    for tensor in params.tensors_mut() {
        for x in tensor.iter_mut() {
            let gi = g[offset];
            let m = &mut state.m[offset];
            let v = &mut state.v[offset];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            *x -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            offset += 1;
        }
    }
    Ok(())
}

/// `base · ½(1 + cos(π·epoch/total))`, never negative.
pub fn cosine_lr(epoch: usize, total: usize, base: f64) -> f64 {
    if total == 0 {
        return base;
    }
    let frac = (epoch as f64 / total as f64).min(1.0);
    (base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())).max(0.0)
}
