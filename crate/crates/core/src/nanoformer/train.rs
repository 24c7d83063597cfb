use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::model::{backward, forward, ForwardMode};
use super::optim::{adam_step, cosine_lr, AdamConfig, AdamState};
use super::params::{init_model, ModelParams};
use super::ModelConfig;
use crate::error::{invalid, Result};
use crate::expressibility::Measure;
use crate::graph::{pad_batch, CircuitGraph, LAYOUT_VERSION};
use crate::seed::derived_rng;

const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of records in the training split.
    pub split: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub target: Measure,
    /// Fit a standardized target; losses are still reported in label units.
    pub normalize_target: bool,
    /// Seed for the train/test split. `None` splits with `seed`.
    pub split_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            epochs: 100,
            split: 0.8,
            adam: AdamConfig::default(),
            seed: 0,
            target: Measure::Exp1,
            normalize_target: true,
            split_seed: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(invalid(format!("split {} must lie strictly between 0 and 1", self.split)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainSample {
    pub id: String,
    pub graph: CircuitGraph,
    pub target: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// NaN when the test split is empty.
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training-split loss of the freshly initialized model.
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochRecord>,
}

/// A trained model together with the target standardization it was fit on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub target_shift: f64,
    pub target_scale: f64,
    pub layout: String,
}

impl Regressor {
    /// Evaluation-mode predictions in label units.
    pub fn predict(&self, layout: &str, graphs: &[&CircuitGraph]) -> Result<Vec<f64>> {
        if layout != self.layout {
            return Err(invalid(format!(
                "graphs use layout {layout:?} but the model was trained on {:?}",
                self.layout
            )));
        }
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(EVAL_CHUNK) {
            let batch = pad_batch(chunk)?;
            let raw = forward(&self.params, &self.config, &batch, ForwardMode::Eval)?;
            out.extend(raw.into_iter().map(|y| y * self.target_scale + self.target_shift));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Regressor,
    pub history: TrainHistory,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

fn split_loss(model: &Regressor, samples: &[&TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let graphs: Vec<&CircuitGraph> = samples.iter().map(|s| &s.graph).collect();
    let pred = model.predict(&model.layout, &graphs)?;
    let sse: f64 = pred.iter().zip(samples).map(|(p, s)| (p - s.target) * (p - s.target)).sum();
    Ok(sse / samples.len() as f64)
}

/// Fit a model on a seeded split of `samples`.
///
/// Records are sorted by id first, so the result does not depend on input order.
pub fn train(samples: &[TrainSample], mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    mcfg.validate()?;
    tcfg.validate()?;
    if samples.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    let mut sorted: Vec<&TrainSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = HashSet::new();
    for s in &sorted {
        if !seen.insert(s.id.as_str()) {
            return Err(invalid(format!("duplicate record id {:?}", s.id)));
        }
        if !s.target.is_finite() {
            return Err(invalid(format!("record {:?} has a non-finite target", s.id)));
        }
    }

    let mut order: Vec<usize> = (0..sorted.len()).collect();
    order.shuffle(&mut derived_rng(tcfg.split_seed.unwrap_or(tcfg.seed), "train/split"));
    let n_train = ((tcfg.split * sorted.len() as f64).round() as usize).clamp(1, sorted.len());
    let train_set: Vec<&TrainSample> = order[..n_train].iter().map(|&i| sorted[i]).collect();
    let test_set: Vec<&TrainSample> = order[n_train..].iter().map(|&i| sorted[i]).collect();

    let (shift, scale) = if tcfg.normalize_target {
        let n = train_set.len() as f64;
        let mean = train_set.iter().map(|s| s.target).sum::<f64>() / n;
        let var = train_set.iter().map(|s| (s.target - mean).powi(2)).sum::<f64>() / n;
        (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
    } else {
        (0.0, 1.0)
    };

    let params = init_model(mcfg, &mut derived_rng(tcfg.seed, "train/init"))?;
    let mut model = Regressor {
        config: mcfg.clone(),
        params,
        target_shift: shift,
        target_scale: scale,
        layout: LAYOUT_VERSION.to_string(),
    };
    let mut adam = AdamState::new(&model.params);
    let mut shuffle_rng = derived_rng(tcfg.seed, "train/shuffle");
    let mut dropout_rng = derived_rng(tcfg.seed, "train/dropout");

    let initial_train_loss = split_loss(&model, &train_set)?;
    let mut epochs = Vec::with_capacity(tcfg.epochs);
    let mut idx: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..tcfg.epochs {
        let lr = cosine_lr(epoch, tcfg.epochs, tcfg.learning_rate);
        idx.shuffle(&mut shuffle_rng);
        for chunk in idx.chunks(tcfg.batch_size) {
            let graphs: Vec<&CircuitGraph> = chunk.iter().map(|&i| &train_set[i].graph).collect();
            let target: Vec<f64> = chunk.iter().map(|&i| (train_set[i].target - shift) / scale).collect();
            let batch = pad_batch(&graphs)?;
            let mode = ForwardMode::Train { seed: dropout_rng.next_u64() };
            let g = backward(&model.params, mcfg, &batch, &target, mode)?;
            adam_step(&mut model.params, &g.grads, &mut adam, lr, &tcfg.adam)?;
        }
        if !model.params.all_finite() {
            return Err(invalid(format!("parameters diverged during epoch {epoch}")));
        }
        epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss: split_loss(&model, &train_set)?,
            test_loss: split_loss(&model, &test_set)?,
        });
    }

    Ok(TrainOutcome {
        model,
        history: TrainHistory { initial_train_loss, epochs },
        train_ids: train_set.iter().map(|s| s.id.clone()).collect(),
        test_ids: test_set.iter().map(|s| s.id.clone()).collect(),
    })
}
