#![allow(dead_code)]

use pqc_express::circuit::{generate_circuit, GatewiseParams};
use pqc_express::graph::{encode_graph, pad_batch, CircuitGraph, PaddedBatch};
use pqc_express::nanoformer::{backward, forward_traced, init_model, mse_loss, ForwardMode, ModelConfig, ModelParams};
use pqc_express::seed::rng_from_seed;
use rand::Rng;

/// Random graphs over 4..=6 qubits with Table II gate counts.
pub fn random_graphs(count: usize, seed: u64) -> Vec<CircuitGraph> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(4..=6);
            let k = rng.random_range(5 * n - 10..=5 * n + 9);
            encode_graph(&generate_circuit(n, k, &GatewiseParams::default(), &mut rng).unwrap()).unwrap()
        })
        .collect()
}

pub struct GradCheck {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

fn loss_and_pattern(p: &ModelParams, cfg: &ModelConfig, batch: &PaddedBatch, target: &[f64]) -> (f64, Vec<bool>) {
    let traces = forward_traced(p, cfg, batch).unwrap();
    let pred: Vec<f64> = traces.iter().map(|t| t.output).collect();
    let pattern = traces.into_iter().flat_map(|t| t.activation_pattern).collect();
    (mse_loss(&pred, target).unwrap(), pattern)
}

/// Central differences against reverse mode on `want` random parameters.
///
/// A coordinate is skipped when either probe flips the sign of any ReLU or
/// LeakyReLU input, because the loss is not differentiable across the kink.
/// Relative error is `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn gradient_check(cfg: &ModelConfig, seed: u64, want: usize, step: f64) -> GradCheck {
    let params = init_model(cfg, &mut rng_from_seed(seed)).unwrap();
    let graphs = random_graphs(8, seed + 1);
    let refs: Vec<&CircuitGraph> = graphs.iter().collect();
    let batch = pad_batch(&refs).unwrap();
    let mut rng = rng_from_seed(seed + 2);
    let target: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();

    let analytic = backward(&params, cfg, &batch, &target, ForwardMode::Eval).unwrap().grads.flatten();
    let base = params.flatten();
    let (_, pattern) = loss_and_pattern(&params, cfg, &batch, &target);

    let mut probe = params.clone();
    let mut out = GradCheck { checked: 0, skipped_kinks: 0, max_rel_error: 0.0 };
    let mut tried = std::collections::HashSet::new();
    while out.checked < want && tried.len() < base.len() {
        let i = rng.random_range(0..base.len());
        if !tried.insert(i) {
            continue;
        }
        let mut eval = |delta: f64| {
            let mut flat = base.clone();
            flat[i] += delta;
            probe.assign_flat(&flat).unwrap();
            loss_and_pattern(&probe, cfg, &batch, &target)
        };
        let (lp, pp) = eval(step);
        let (lm, pm) = eval(-step);
        if pp != pattern || pm != pattern {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        out.max_rel_error = out.max_rel_error.max(rel);
        out.checked += 1;
    }
    out
}
