use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{invalid, Result};

/// `y = x·W + b` with `W` stored row-major as `n_in × n_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }

    /// Weights and biases uniform in `±1/√n_in`.
    fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut draw = |len: usize| (0..len).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
        let w = draw(n_in * n_out);
        let b = draw(n_out);
        Self { n_in, n_out, w, b }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNorm {
    fn new(dim: usize) -> Self {
        Self { gamma: vec![1.0; dim], beta: vec![0.0; dim] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub attn_out: Linear,
    pub norm1: LayerNorm,
    pub ff: Linear,
    pub norm2: LayerNorm,
}

/// All trainable arrays. The same type doubles as a gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gate_embed: Linear,
    pub adj_embed: Linear,
    pub layers: Vec<EncoderLayer>,
    /// Hidden FC layers followed by the scalar output layer.
    pub head: Vec<Linear>,
}

fn head_dims(cfg: &ModelConfig) -> Vec<usize> {
    let mut dims = vec![cfg.hidden_dim];
    dims.extend(&cfg.fc_dims);
    dims.push(1);
    dims
}

/// Closed-form parameter count.
pub fn parameter_count(cfg: &ModelConfig) -> usize {
    let h = cfg.hidden_dim;
    let embed = (cfg.feature_dim + 1) * h + (cfg.max_nodes + 1) * h;
    let layer = 5 * (h * h + h) + 4 * h;
    let head: usize = head_dims(cfg).windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    embed + cfg.n_layers * layer + head
}

pub fn init_model<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<ModelParams> {
    cfg.validate()?;
    let h = cfg.hidden_dim;
    let gate_embed = Linear::init(cfg.feature_dim, h, rng);
    let adj_embed = Linear::init(cfg.max_nodes, h, rng);
    let layers = (0..cfg.n_layers)
        .map(|_| EncoderLayer {
            query: Linear::init(h, h, rng),
            key: Linear::init(h, h, rng),
            value: Linear::init(h, h, rng),
            attn_out: Linear::init(h, h, rng),
            norm1: LayerNorm::new(h),
            ff: Linear::init(h, h, rng),
            norm2: LayerNorm::new(h),
        })
        .collect();
    let head = head_dims(cfg).windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
    Ok(ModelParams { gate_embed, adj_embed, layers, head })
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_dim;
        Self {
            gate_embed: Linear::zeros(cfg.feature_dim, h),
            adj_embed: Linear::zeros(cfg.max_nodes, h),
            layers: (0..cfg.n_layers)
                .map(|_| EncoderLayer {
                    query: Linear::zeros(h, h),
                    key: Linear::zeros(h, h),
                    value: Linear::zeros(h, h),
                    attn_out: Linear::zeros(h, h),
                    norm1: LayerNorm { gamma: vec![0.0; h], beta: vec![0.0; h] },
                    ff: Linear::zeros(h, h),
                    norm2: LayerNorm { gamma: vec![0.0; h], beta: vec![0.0; h] },
                })
                .collect(),
            head: head_dims(cfg).windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    /// Named arrays in the canonical order.
    pub fn tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out: Vec<(String, &Vec<f64>)> = Vec::new();
        push_linear(&mut out, "gate_embed".into(), &self.gate_embed);
        push_linear(&mut out, "adj_embed".into(), &self.adj_embed);
        for (i, l) in self.layers.iter().enumerate() {
            push_linear(&mut out, format!("layers.{i}.query"), &l.query);
            push_linear(&mut out, format!("layers.{i}.key"), &l.key);
            push_linear(&mut out, format!("layers.{i}.value"), &l.value);
            push_linear(&mut out, format!("layers.{i}.attn_out"), &l.attn_out);
            out.push((format!("layers.{i}.norm1.gamma"), &l.norm1.gamma));
            out.push((format!("layers.{i}.norm1.beta"), &l.norm1.beta));
            push_linear(&mut out, format!("layers.{i}.ff"), &l.ff);
            out.push((format!("layers.{i}.norm2.gamma"), &l.norm2.gamma));
            out.push((format!("layers.{i}.norm2.beta"), &l.norm2.beta));
        }
        for (i, l) in self.head.iter().enumerate() {
            push_linear(&mut out, format!("head.{i}"), l);
        }
        out
    }

    /// Mutable arrays in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        out.push(&mut self.gate_embed.w);
        out.push(&mut self.gate_embed.b);
        out.push(&mut self.adj_embed.w);
        out.push(&mut self.adj_embed.b);
        for l in &mut self.layers {
            for lin in [&mut l.query, &mut l.key, &mut l.value, &mut l.attn_out] {
                out.push(&mut lin.w);
                out.push(&mut lin.b);
            }
            out.push(&mut l.norm1.gamma);
            out.push(&mut l.norm1.beta);
            out.push(&mut l.ff.w);
            out.push(&mut l.ff.b);
            out.push(&mut l.norm2.gamma);
            out.push(&mut l.norm2.beta);
        }
        for lin in &mut self.head {
            out.push(&mut lin.w);
            out.push(&mut lin.b);
        }
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    /// Overwrite every array from a flat vector in canonical order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_parameters() {
            return Err(invalid(format!("{} values for {} parameters", flat.len(), self.n_parameters())));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let others: Vec<Vec<f64>> = other.tensors().into_iter().map(|(_, t)| t.clone()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(others) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

fn push_linear<'a>(out: &mut Vec<(String, &'a Vec<f64>)>, name: String, l: &'a Linear) {
    out.push((format!("{name}.w"), &l.w));
    out.push((format!("{name}.b"), &l.b));
}
