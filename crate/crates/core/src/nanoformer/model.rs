//! Forward pass and its exact reverse-mode derivative.
//!
//! Each batch member is processed on its real nodes only, so padding can
//! neither attend nor be attended to and never reaches the pooled vector.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::params::{LayerNorm, Linear, ModelParams};
use super::{AdjacencyInput, ModelConfig, Readout};
use crate::error::{invalid, Result};
use crate::graph::PaddedBatch;
use crate::seed::rng_from_seed;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    /// Dropout on; masks are drawn from streams seeded by `seed`.
    Train { seed: u64 },
}

struct GraphInput {
    n: usize,
    x: Vec<f64>,
    adj: Vec<f64>,
}

fn graph_inputs(cfg: &ModelConfig, batch: &PaddedBatch) -> Result<Vec<GraphInput>> {
    if batch.feature_dim != cfg.feature_dim {
        return Err(invalid(format!(
            "batch feature width {} does not match model width {}",
            batch.feature_dim, cfg.feature_dim
        )));
    }
    if batch.max_nodes > cfg.max_nodes {
        return Err(invalid(format!(
            "batch padded to {} nodes but the model accepts at most {}",
            batch.max_nodes, cfg.max_nodes
        )));
    }
    let m = cfg.max_nodes;
    (0..batch.batch_size)
        .map(|b| {
            let n = batch.n_nodes(b);
            if n == 0 || batch.mask[b * batch.max_nodes..b * batch.max_nodes + n].iter().any(|v| !v) {
                return Err(invalid(format!("batch member {b}: real nodes must form a nonempty prefix")));
            }
            let mut x = Vec::with_capacity(n * cfg.feature_dim);
            let mut adj = vec![0.0; n * m];
            for i in 0..n {
                x.extend_from_slice(batch.feature_row(b, i));
                for j in 0..n {
                    adj[i * m + j] = match cfg.adjacency_input {
                        AdjacencyInput::OutRow => batch.adjacency_row(b, i)[j],
                        AdjacencyInput::InRow => batch.adjacency_row(b, j)[i],
                    };
                }
            }
            Ok(GraphInput { n, x, adj })
        })
        .collect()
}

fn affine(x: &[f64], rows: usize, l: &Linear) -> Vec<f64> {
    let (n_in, n_out) = (l.n_in, l.n_out);
    let mut y = vec![0.0; rows * n_out];
    for i in 0..rows {
        let yr = &mut y[i * n_out..(i + 1) * n_out];
        yr.copy_from_slice(&l.b);
        for k in 0..n_in {
            let xv = x[i * n_in + k];
            if xv == 0.0 {
                continue;
            }
            let wr = &l.w[k * n_out..(k + 1) * n_out];
            for (y, w) in yr.iter_mut().zip(wr) {
                *y += xv * w;
            }
        }
    }
    y
}

/// Accumulates `dW`, `db` into `g` and returns `dx` when requested.
fn affine_backward(x: &[f64], rows: usize, l: &Linear, dy: &[f64], g: &mut Linear, want_dx: bool) -> Vec<f64> {
    let (n_in, n_out) = (l.n_in, l.n_out);
    let mut dx = if want_dx { vec![0.0; rows * n_in] } else { Vec::new() };
    for i in 0..rows {
        let dyr = &dy[i * n_out..(i + 1) * n_out];
        for (gb, d) in g.b.iter_mut().zip(dyr) {
            *gb += d;
        }
        for k in 0..n_in {
            let xv = x[i * n_in + k];
            let wr = &l.w[k * n_out..(k + 1) * n_out];
            if xv != 0.0 {
                let gr = &mut g.w[k * n_out..(k + 1) * n_out];
                for (gw, d) in gr.iter_mut().zip(dyr) {
                    *gw += xv * d;
                }
            }
            if want_dx {
                dx[i * n_in + k] = wr.iter().zip(dyr).map(|(w, d)| w * d).sum();
            }
        }
    }
    dx
}

struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], rows: usize, ln: &LayerNorm) -> (Vec<f64>, NormCache) {
    let h = ln.gamma.len();
    let mut y = vec![0.0; rows * h];
    let mut xhat = vec![0.0; rows * h];
    let mut inv_std = vec![0.0; rows];
    for i in 0..rows {
        let xr = &x[i * h..(i + 1) * h];
        let mean = xr.iter().sum::<f64>() / h as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = inv;
        for c in 0..h {
            let xh = (xr[c] - mean) * inv;
            xhat[i * h + c] = xh;
            y[i * h + c] = ln.gamma[c] * xh + ln.beta[c];
        }
    }
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &[f64], rows: usize, ln: &LayerNorm, cache: &NormCache, g: &mut LayerNorm) -> Vec<f64> {
    let h = ln.gamma.len();
    let hf = h as f64;
    let mut dx = vec![0.0; rows * h];
    for i in 0..rows {
        let dyr = &dy[i * h..(i + 1) * h];
        let xh = &cache.xhat[i * h..(i + 1) * h];
        let mut sum_d = 0.0;
        let mut sum_dx = 0.0;
        for c in 0..h {
            g.gamma[c] += dyr[c] * xh[c];
            g.beta[c] += dyr[c];
            let d = dyr[c] * ln.gamma[c];
            sum_d += d;
            sum_dx += d * xh[c];
        }
        let inv = cache.inv_std[i];
        for c in 0..h {
            let d = dyr[c] * ln.gamma[c];
            dx[i * h + c] = inv / hf * (hf * d - sum_d - xh[c] * sum_dx);
        }
    }
    dx
}

struct AttnCache {
    /// One `n × n` row-stochastic matrix per head.
    probs: Vec<Vec<f64>>,
    ctx: Vec<f64>,
}

fn attention(q: &[f64], k: &[f64], v: &[f64], n: usize, hidden: usize, heads: usize) -> AttnCache {
    let d = hidden / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut ctx = vec![0.0; n * hidden];
    let mut probs = Vec::with_capacity(heads);
    for hd in 0..heads {
        let off = hd * d;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let qi = &q[i * hidden + off..i * hidden + off + d];
            let row = &mut p[i * n..(i + 1) * n];
            for j in 0..n {
                let kj = &k[j * hidden + off..j * hidden + off + d];
                row[j] = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for s in row.iter_mut() {
                *s = (*s - max).exp();
                total += *s;
            }
            for s in row.iter_mut() {
                *s /= total;
            }
            let ci = &mut ctx[i * hidden + off..i * hidden + off + d];
            for j in 0..n {
                let pij = row[j];
                let vj = &v[j * hidden + off..j * hidden + off + d];
                for (c, vv) in ci.iter_mut().zip(vj) {
                    *c += pij * vv;
                }
            }
        }
        probs.push(p);
    }
    AttnCache { probs, ctx }
}

fn attention_backward(
    dctx: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    cache: &AttnCache,
    n: usize,
    hidden: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let heads = cache.probs.len();
    let d = hidden / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut dq = vec![0.0; n * hidden];
    let mut dk = vec![0.0; n * hidden];
    let mut dv = vec![0.0; n * hidden];
    let mut dp = vec![0.0; n];
    for (hd, p) in cache.probs.iter().enumerate() {
        let off = hd * d;
        for i in 0..n {
            let dci = &dctx[i * hidden + off..i * hidden + off + d];
            let prow = &p[i * n..(i + 1) * n];
            for j in 0..n {
                let vj = &v[j * hidden + off..j * hidden + off + d];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                let dvj = &mut dv[j * hidden + off..j * hidden + off + d];
                for (g, dc) in dvj.iter_mut().zip(dci) {
                    *g += prow[j] * dc;
                }
            }
            let dot: f64 = prow.iter().zip(&dp).map(|(a, b)| a * b).sum();
            for j in 0..n {
                let ds = prow[j] * (dp[j] - dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                for c in 0..d {
                    dq[i * hidden + off + c] += ds * k[j * hidden + off + c];
                    dk[j * hidden + off + c] += ds * q[i * hidden + off + c];
                }
            }
        }
    }
    (dq, dk, dv)
}

fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

struct LayerCache {
    input: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: AttnCache,
    drop1: Option<Vec<f64>>,
    norm1: NormCache,
    x1: Vec<f64>,
    ff_pre: Vec<f64>,
    drop2: Option<Vec<f64>>,
    norm2: NormCache,
}

struct GraphCache {
    layers: Vec<LayerCache>,
    head_inputs: Vec<Vec<f64>>,
    head_pre: Vec<Vec<f64>>,
    output: f64,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn forward_graph(p: &ModelParams, cfg: &ModelConfig, g: &GraphInput, mut rng: Option<&mut rand_chacha::ChaCha8Rng>) -> GraphCache {
    let (n, hidden) = (g.n, cfg.hidden_dim);
    let mut h = affine(&g.x, n, &p.gate_embed);
    for (a, b) in h.iter_mut().zip(affine(&g.adj, n, &p.adj_embed)) {
        *a += b;
    }
    let use_dropout = cfg.dropout_rate > 0.0 && rng.is_some();
    let mut layers = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let q = affine(&h, n, &layer.query);
        let k = affine(&h, n, &layer.key);
        let v = affine(&h, n, &layer.value);
        let attn = attention(&q, &k, &v, n, hidden, cfg.n_heads);
        let mut o = affine(&attn.ctx, n, &layer.attn_out);
        let drop1 = if use_dropout {
            let m = dropout_mask(n * hidden, cfg.dropout_rate, rng.as_deref_mut().expect("checked"));
            o.iter_mut().zip(&m).for_each(|(x, s)| *x *= s);
            Some(m)
        } else {
            None
        };
        let r1: Vec<f64> = h.iter().zip(&o).map(|(a, b)| a + b).collect();
        let (x1, norm1) = layer_norm(&r1, n, &layer.norm1);
        let ff_pre = affine(&x1, n, &layer.ff);
        let mut f: Vec<f64> = ff_pre.iter().map(|x| x.max(0.0)).collect();
        let drop2 = if use_dropout {
            let m = dropout_mask(n * hidden, cfg.dropout_rate, rng.as_deref_mut().expect("checked"));
            f.iter_mut().zip(&m).for_each(|(x, s)| *x *= s);
            Some(m)
        } else {
            None
        };
        let r2: Vec<f64> = x1.iter().zip(&f).map(|(a, b)| a + b).collect();
        let (out, norm2) = layer_norm(&r2, n, &layer.norm2);
        layers.push(LayerCache { input: h, q, k, v, attn, drop1, norm1, x1, ff_pre, drop2, norm2 });
        h = out;
    }
    let pooled: Vec<f64> = match cfg.readout {
        Readout::MeanPool => (0..hidden).map(|c| (0..n).map(|i| h[i * hidden + c]).sum::<f64>() / n as f64).collect(),
        Readout::EndNode => h[(n - 1) * hidden..n * hidden].to_vec(),
    };
    let mut z = pooled;
    let mut head_inputs = Vec::with_capacity(p.head.len());
    let mut head_pre = Vec::with_capacity(p.head.len());
    let last = p.head.len() - 1;
    let mut output = 0.0;
    for (idx, lin) in p.head.iter().enumerate() {
        let pre = affine(&z, 1, lin);
        head_inputs.push(std::mem::take(&mut z));
        if idx == last {
            output = pre[0];
        } else {
            z = pre.iter().map(|x| leaky(*x, cfg.leaky_slope)).collect();
            head_pre.push(pre);
        }
    }
    GraphCache { layers, head_inputs, head_pre, output }
}

fn backward_graph(p: &ModelParams, cfg: &ModelConfig, g: &GraphInput, cache: &GraphCache, dy: f64, grads: &mut ModelParams) {
    let (n, hidden) = (g.n, cfg.hidden_dim);
    let last = p.head.len() - 1;
    let mut dz = vec![dy];
    for idx in (0..p.head.len()).rev() {
        let dpre: Vec<f64> = if idx == last {
            dz
        } else {
            dz.iter()
                .zip(&cache.head_pre[idx])
                .map(|(d, x)| if *x > 0.0 { *d } else { cfg.leaky_slope * d })
                .collect()
        };
        dz = affine_backward(&cache.head_inputs[idx], 1, &p.head[idx], &dpre, &mut grads.head[idx], true);
    }
    let mut dh = vec![0.0; n * hidden];
    match cfg.readout {
        Readout::MeanPool => {
            for i in 0..n {
                for c in 0..hidden {
                    dh[i * hidden + c] = dz[c] / n as f64;
                }
            }
        }
        Readout::EndNode => dh[(n - 1) * hidden..].copy_from_slice(&dz),
    }
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let (layer, gl) = (&p.layers[li], &mut grads.layers[li]);
        let dr2 = layer_norm_backward(&dh, n, &layer.norm2, &lc.norm2, &mut gl.norm2);
        let mut df = dr2.clone();
        if let Some(m) = &lc.drop2 {
            df.iter_mut().zip(m).for_each(|(d, s)| *d *= s);
        }
        df.iter_mut().zip(&lc.ff_pre).for_each(|(d, x)| {
            if *x <= 0.0 {
                *d = 0.0
            }
        });
        let mut dx1 = dr2;
        let back = affine_backward(&lc.x1, n, &layer.ff, &df, &mut gl.ff, true);
        dx1.iter_mut().zip(back).for_each(|(a, b)| *a += b);
        let dr1 = layer_norm_backward(&dx1, n, &layer.norm1, &lc.norm1, &mut gl.norm1);
        let mut d_o = dr1.clone();
        if let Some(m) = &lc.drop1 {
            d_o.iter_mut().zip(m).for_each(|(d, s)| *d *= s);
        }
        let dctx = affine_backward(&lc.attn.ctx, n, &layer.attn_out, &d_o, &mut gl.attn_out, true);
        let (dq, dk, dv) = attention_backward(&dctx, &lc.q, &lc.k, &lc.v, &lc.attn, n, hidden);
        let mut d_in = dr1;
        for (x, lin, glin, d) in [
            (&lc.input, &layer.query, &mut gl.query, &dq),
            (&lc.input, &layer.key, &mut gl.key, &dk),
            (&lc.input, &layer.value, &mut gl.value, &dv),
        ] {
            let back = affine_backward(x, n, lin, d, glin, true);
            d_in.iter_mut().zip(back).for_each(|(a, b)| *a += b);
        }
        dh = d_in;
    }
    affine_backward(&g.x, n, &p.gate_embed, &dh, &mut grads.gate_embed, false);
    affine_backward(&g.adj, n, &p.adj_embed, &dh, &mut grads.adj_embed, false);
}

fn member_rngs(mode: ForwardMode, count: usize) -> Vec<Option<rand_chacha::ChaCha8Rng>> {
    match mode {
        ForwardMode::Eval => (0..count).map(|_| None).collect(),
        ForwardMode::Train { seed } => {
            let mut master = rng_from_seed(seed);
            (0..count).map(|_| Some(rng_from_seed(master.next_u64()))).collect()
        }
    }
}

fn check_params(p: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    cfg.validate()?;
    if p.layers.len() != cfg.n_layers
        || p.gate_embed.n_out != cfg.hidden_dim
        || p.gate_embed.n_in != cfg.feature_dim
        || p.adj_embed.n_in != cfg.max_nodes
        || p.head.len() != cfg.fc_dims.len() + 1
    {
        return Err(invalid("parameters do not match the model configuration"));
    }
    Ok(())
}

/// One scalar prediction per batch member.
pub fn forward(p: &ModelParams, cfg: &ModelConfig, batch: &PaddedBatch, mode: ForwardMode) -> Result<Vec<f64>> {
    check_params(p, cfg)?;
    let inputs = graph_inputs(cfg, batch)?;
    let rngs = member_rngs(mode, inputs.len());
    Ok(inputs
        .par_iter()
        .zip(rngs)
        .map(|(g, mut r)| forward_graph(p, cfg, g, r.as_mut()).output)
        .collect())
}

/// Evaluation-mode internals of one graph, for inspection.
#[derive(Clone, Debug)]
pub struct GraphTrace {
    pub output: f64,
    /// Per layer, per head: `n × n` attention weights, row-major.
    pub attention: Vec<Vec<Vec<f64>>>,
    /// Sign pattern of every ReLU / LeakyReLU input, in evaluation order.
    pub activation_pattern: Vec<bool>,
}

pub fn forward_traced(p: &ModelParams, cfg: &ModelConfig, batch: &PaddedBatch) -> Result<Vec<GraphTrace>> {
    check_params(p, cfg)?;
    let inputs = graph_inputs(cfg, batch)?;
    Ok(inputs
        .iter()
        .map(|g| {
            let c = forward_graph(p, cfg, g, None);
            let mut pattern: Vec<bool> = c.layers.iter().flat_map(|l| l.ff_pre.iter().map(|x| *x > 0.0)).collect();
            pattern.extend(c.head_pre.iter().flatten().map(|x| *x > 0.0));
            GraphTrace {
                output: c.output,
                attention: c.layers.into_iter().map(|l| l.attn.probs).collect(),
                activation_pattern: pattern,
            }
        })
        .collect())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(invalid(format!("mse over {} predictions and {} targets", pred.len(), target.len())));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

pub struct BatchGradient {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub grads: ModelParams,
}

/// Loss `mean((ŷ − y)²)` over the batch and its gradient for every array.
/// Per-member gradients are summed in member order.
pub fn backward(
    p: &ModelParams,
    cfg: &ModelConfig,
    batch: &PaddedBatch,
    target: &[f64],
    mode: ForwardMode,
) -> Result<BatchGradient> {
    check_params(p, cfg)?;
    let inputs = graph_inputs(cfg, batch)?;
    if target.len() != inputs.len() {
        return Err(invalid(format!("{} targets for a batch of {}", target.len(), inputs.len())));
    }
    let rngs = member_rngs(mode, inputs.len());
    let scale = 2.0 / inputs.len() as f64;
    let per_member: Vec<(f64, ModelParams)> = inputs
        .par_iter()
        .zip(rngs)
        .zip(target.par_iter())
        .map(|((g, mut r), t)| {
            let cache = forward_graph(p, cfg, g, r.as_mut());
            let mut grads = ModelParams::zeros(cfg);
            backward_graph(p, cfg, g, &cache, scale * (cache.output - t), &mut grads);
            (cache.output, grads)
        })
        .collect();
    let mut total = ModelParams::zeros(cfg);
    let mut predictions = Vec::with_capacity(per_member.len());
    for (y, g) in per_member {
        predictions.push(y);
        total.add_scaled(&g, 1.0);
    }
    let loss = mse_loss(&predictions, target)?;
    Ok(BatchGradient { loss, predictions, grads: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_circuit, GatewiseParams};
    use crate::graph::{encode_graph, pad_batch, pad_batch_to, CircuitGraph};
    use crate::nanoformer::init_model;

    fn graphs(count: usize, seed: u64) -> Vec<CircuitGraph> {
        let mut rng = rng_from_seed(seed);
        (0..count)
            .map(|i| {
                let n = 4 + i % 3;
                let k = n + 3 + (i * 7) % 12;
                encode_graph(&generate_circuit(n, k, &GatewiseParams::default(), &mut rng).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn duplicated_member_gets_identical_prediction() {
        let cfg = ModelConfig::from_structure("2-2-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(1)).unwrap();
        let g = graphs(1, 3);
        let batch = pad_batch(&[&g[0], &g[0]]).unwrap();
        let y = forward(&p, &cfg, &batch, ForwardMode::Eval).unwrap();
        assert_eq!(y[0], y[1]);
    }

    #[test]
    fn padding_does_not_change_predictions() {
        let cfg = ModelConfig::from_structure("1-2-32").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(2)).unwrap();
        let gs = graphs(5, 4);
        for g in &gs {
            let alone = forward(&p, &cfg, &pad_batch(&[g]).unwrap(), ForwardMode::Eval).unwrap()[0];
            let padded = forward(&p, &cfg, &pad_batch_to(&[g], cfg.max_nodes).unwrap(), ForwardMode::Eval).unwrap()[0];
            let refs: Vec<&CircuitGraph> = gs.iter().collect();
            let together = forward(&p, &cfg, &pad_batch(&refs).unwrap(), ForwardMode::Eval).unwrap();
            let idx = gs.iter().position(|x| std::ptr::eq(x, g)).unwrap();
            assert!((alone - padded).abs() < 1e-10);
            assert!((alone - together[idx]).abs() < 1e-10);
        }
    }

    #[test]
    fn attention_rows_are_distributions() {
        let cfg = ModelConfig::from_structure("2-2-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(3)).unwrap();
        let gs = graphs(3, 5);
        let refs: Vec<&CircuitGraph> = gs.iter().collect();
        let traces = forward_traced(&p, &cfg, &pad_batch(&refs).unwrap()).unwrap();
        for (t, g) in traces.iter().zip(&gs) {
            for layer in &t.attention {
                for head in layer {
                    for row in head.chunks(g.n_nodes) {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                        assert!(row.iter().all(|x| *x >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_residual_zeroes_output_layer_gradient() {
        let cfg = ModelConfig::from_structure("1-1-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(6)).unwrap();
        let gs = graphs(4, 6);
        let refs: Vec<&CircuitGraph> = gs.iter().collect();
        let batch = pad_batch(&refs).unwrap();
        let y = forward(&p, &cfg, &batch, ForwardMode::Eval).unwrap();
        let bg = backward(&p, &cfg, &batch, &y, ForwardMode::Eval).unwrap();
        assert_eq!(bg.loss, 0.0);
        let out = bg.grads.head.last().unwrap();
        assert!(out.w.iter().chain(&out.b).all(|g| *g == 0.0));
    }

    #[test]
    fn padded_adjacency_columns_get_no_gradient() {
        let cfg = ModelConfig::from_structure("2-1-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(7)).unwrap();
        let gs = graphs(4, 8);
        let widest = gs.iter().map(|g| g.n_nodes).max().unwrap();
        let refs: Vec<&CircuitGraph> = gs.iter().collect();
        let batch = pad_batch_to(&refs, cfg.max_nodes).unwrap();
        let bg = backward(&p, &cfg, &batch, &[0.3, -0.2, 1.0, 0.5], ForwardMode::Eval).unwrap();
        let h = cfg.hidden_dim;
        for col in widest..cfg.max_nodes {
            assert!(bg.grads.adj_embed.w[col * h..(col + 1) * h].iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn dropout_is_seeded() {
        let cfg = ModelConfig::from_structure("1-1-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(9)).unwrap();
        let gs = graphs(3, 9);
        let refs: Vec<&CircuitGraph> = gs.iter().collect();
        let batch = pad_batch(&refs).unwrap();
        let a = forward(&p, &cfg, &batch, ForwardMode::Train { seed: 1 }).unwrap();
        let b = forward(&p, &cfg, &batch, ForwardMode::Train { seed: 1 }).unwrap();
        let c = forward(&p, &cfg, &batch, ForwardMode::Train { seed: 2 }).unwrap();
        let e = forward(&p, &cfg, &batch, ForwardMode::Eval).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let cfg = ModelConfig::from_structure("1-1-16").unwrap();
        let p = init_model(&cfg, &mut rng_from_seed(0)).unwrap();
        let gs = graphs(2, 1);
        let batch = pad_batch(&[&gs[0], &gs[1]]).unwrap();
        assert!(backward(&p, &cfg, &batch, &[1.0], ForwardMode::Eval).is_err());
        let mut small = cfg.clone();
        small.max_nodes = 5;
        let p_small = init_model(&small, &mut rng_from_seed(0)).unwrap();
        assert!(forward(&p_small, &small, &batch, ForwardMode::Eval).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        let base = mse_loss(&[0.5, -1.0, 2.0], &[0.0, 0.0, 1.0]).unwrap();
        let scaled = mse_loss(&[1.5, -3.0, 4.0], &[0.0, 0.0, 1.0]).unwrap();
        // residuals (0.5, -1, 1) scaled by 3 → (1.5, -3, 3)
        assert!((scaled - 9.0 * base).abs() < 1e-12);
    }
}
