//! The four expressibility labels.
//!
//! * `exp1`: KL divergence between the circuit's pairwise-fidelity histogram
//!   and the binned Haar fidelity law `(2^N−1)(1−F)^{2^N−2}`.
//! * `exp1r`: `−ln(exp1 / exp1_idle)` with `exp1_idle = (2^N−1)·ln n_bins`.
//! * `exp2`: one minus the biased Gaussian-kernel MMD between output
//!   distributions (initial state `|+⟩^N`) and uniform simplex draws.
//! * `exp2_noisy`: `exp2` evaluated on the depolarizing + readout-flip model.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::{
    apply_readout_flips, fidelity, run_noisy, run_pure, sample_params, BasisProbabilities, InitialState,
    NoiseConfig, ParamAssignment,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpConfig {
    pub n_fidelity_samples: usize,
    pub n_bins: usize,
    pub mmd_samples: usize,
    pub kernel_sigma: f64,
    /// Feed all `2^N` probabilities to the MMD instead of the first `2^N − 1`.
    pub full_vector: bool,
    /// Lower clamp applied to `exp1` before taking the relative log.
    pub exp1_floor: f64,
    pub seed: u64,
}

impl Default for ExpConfig {
    fn default() -> Self {
        Self {
            n_fidelity_samples: 5000,
            n_bins: 75,
            mmd_samples: 500,
            kernel_sigma: 0.01,
            full_vector: false,
            exp1_floor: 1e-12,
            seed: 0,
        }
    }
}

impl ExpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fidelity_samples < 2 {
            return Err(invalid("n_fidelity_samples must be at least 2"));
        }
        if self.n_bins < 2 {
            return Err(invalid("n_bins must be at least 2"));
        }
        if self.mmd_samples < 2 {
            return Err(invalid("mmd_samples must be at least 2"));
        }
        if !(self.kernel_sigma > 0.0) {
            return Err(invalid("kernel_sigma must be positive"));
        }
        if !(self.exp1_floor > 0.0) {
            return Err(invalid("exp1_floor must be positive"));
        }
        Ok(())
    }
}

/// Bin `b` covers `[b/n, (b+1)/n)`; the last bin is closed at 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FidelityHistogram {
    pub n_bins: usize,
    pub counts: Vec<u64>,
    pub n_samples: u64,
}

impl FidelityHistogram {
    pub fn new(n_bins: usize) -> Self {
        Self { n_bins, counts: vec![0; n_bins], n_samples: 0 }
    }

    pub fn bin_of(&self, f: f64) -> usize {
        ((f.clamp(0.0, 1.0) * self.n_bins as f64) as usize).min(self.n_bins - 1)
    }

    pub fn add(&mut self, f: f64) {
        let b = self.bin_of(f);
        self.counts[b] += 1;
        self.n_samples += 1;
    }

    pub fn normalized(&self) -> Vec<f64> {
        let n = self.n_samples as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Haar pairwise-fidelity law integrated over equal-width bins.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarBinDistribution {
    pub n_qubits: usize,
    pub n_bins: usize,
    pub probs: Vec<f64>,
    /// Natural logs of `probs`, computed without underflow.
    pub ln_probs: Vec<f64>,
}

/// Bin masses from the Haar CDF `1 − (1−F)^{2^N−1}`:
/// bin `[lo, hi)` gets `(1−lo)^{2^N−1} − (1−hi)^{2^N−1}`.
pub fn haar_bin_probabilities(n_qubits: usize, n_bins: usize) -> Result<HaarBinDistribution> {
    if n_qubits == 0 || n_qubits > 30 {
        return Err(invalid(format!("unsupported qubit count {n_qubits}")));
    }
    if n_bins < 2 {
        return Err(invalid("n_bins must be at least 2"));
    }
    let e = (1u64 << n_qubits) - 1;
    let nb = n_bins as f64;
    let mut probs = Vec::with_capacity(n_bins);
    let mut ln_probs = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        // survival values 1 − F at the bin edges, as exact ratios
        let s_lo = (n_bins - b) as f64 / nb;
        let s_hi = (n_bins - b - 1) as f64 / nb;
        let p = s_lo.powf(e as f64) - s_hi.powf(e as f64);
        let ratio_pow = if s_hi == 0.0 { 0.0 } else { (e as f64 * (s_hi / s_lo).ln()).exp() };
        probs.push(p);
        ln_probs.push(e as f64 * s_lo.ln() + (-ratio_pow).ln_1p());
    }
    Ok(HaarBinDistribution { n_qubits, n_bins, probs, ln_probs })
}

/// Histogram of fidelities between independent pairs of states produced by
/// parameter assignments drawn with `sampler`.
pub fn fidelity_histogram_with<R, F>(
    c: &Circuit,
    n_samples: usize,
    n_bins: usize,
    mut sampler: F,
    rng: &mut R,
) -> Result<FidelityHistogram>
where
    R: Rng + ?Sized,
    F: FnMut(&Circuit, &mut R) -> ParamAssignment,
{
    let mut hist = FidelityHistogram::new(n_bins);
    for _ in 0..n_samples {
        let a = sampler(c, rng);
        let b = sampler(c, rng);
        let sa = run_pure(c, &a, InitialState::AllZero)?;
        let sb = run_pure(c, &b, InitialState::AllZero)?;
        hist.add(fidelity(&sa, &sb)?);
    }
    Ok(hist)
}

pub fn fidelity_histogram<R: Rng + ?Sized>(c: &Circuit, cfg: &ExpConfig, rng: &mut R) -> Result<FidelityHistogram> {
    fidelity_histogram_with(c, cfg.n_fidelity_samples, cfg.n_bins, |c, r| sample_params(c, r), rng)
}

/// `Σ_b p̂_b ln(p̂_b / q_b)` over bins with nonzero empirical mass.
pub fn kl_to_haar(empirical: &[f64], haar: &HaarBinDistribution) -> Result<f64> {
    if empirical.len() != haar.n_bins {
        return Err(invalid(format!("{} empirical bins vs {} Haar bins", empirical.len(), haar.n_bins)));
    }
    Ok(empirical
        .iter()
        .zip(&haar.ln_probs)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, lq)| p * (p.ln() - lq))
        .sum())
}

pub fn exp1<R: Rng + ?Sized>(c: &Circuit, cfg: &ExpConfig, rng: &mut R) -> Result<f64> {
    let hist = fidelity_histogram(c, cfg, rng)?;
    let haar = haar_bin_probabilities(c.n_qubits(), cfg.n_bins)?;
    kl_to_haar(&hist.normalized(), &haar)
}

/// KL value of a circuit whose output does not depend on its parameters.
pub fn exp1_idle(n_qubits: usize, n_bins: usize) -> f64 {
    ((1u64 << n_qubits) - 1) as f64 * (n_bins as f64).ln()
}

pub fn exp1_relative(exp1_value: f64, n_qubits: usize, n_bins: usize) -> Result<f64> {
    if !(exp1_value > 0.0) {
        return Err(Error::Domain(format!("relative KL needs a positive exp1, got {exp1_value}")));
    }
    Ok(-(exp1_value / exp1_idle(n_qubits, n_bins)).ln())
}

/// `m` uniform draws from the `(dim−1)`-simplex, each given by its first
/// `dim − 1` coordinates (normalized unit exponentials).
pub fn sample_simplex_uniform<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if dim < 2 || m == 0 {
        return Err(invalid(format!("simplex sampling needs dim >= 2 and m >= 1 (dim={dim}, m={m})")));
    }
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = e.iter().sum();
        let head: Vec<f64> = e[..dim - 1].iter().map(|x| x / total).collect();
        if head.iter().sum::<f64>() < 1.0 {
            out.push(head);
        }
    }
    Ok(out)
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (4.0 * sigma)).exp()
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `1 − |Σ_ij k(Xi,Xj) + k(Yi,Yj) − 2k(Xi,Yj)| / M²`.
pub fn mmd_expressibility(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid(format!("MMD needs equal nonempty sample sets ({} vs {})", x.len(), y.len())));
    }
    let dim = x[0].len();
    if x.iter().chain(y).any(|v| v.len() != dim) {
        return Err(invalid("MMD samples have mixed dimensions"));
    }
    let m = x.len();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::default();
            for j in 0..m {
                let kxx = gaussian_kernel(&x[i], &x[j], sigma);
                let kyy = gaussian_kernel(&y[i], &y[j], sigma);
                let kxy = gaussian_kernel(&x[i], &y[j], sigma);
                acc.add(kxx + kyy - 2.0 * kxy);
            }
            acc.value()
        })
        .collect();
    let mut total = CompensatedSum::default();
    for r in rows {
        total.add(r);
    }
    Ok(1.0 - total.value().abs() / (m * m) as f64)
}

/// Output distribution of one parameter draw, started from `|+⟩^N`.
fn output_distribution(c: &Circuit, p: &ParamAssignment, noise: &NoiseConfig) -> Result<Vec<f64>> {
    let mut probs = if noise.gate_noise_free() {
        run_pure(c, p, InitialState::AllPlus)?.basis_probabilities()
    } else {
        run_noisy(c, p, noise, InitialState::AllPlus)?.basis_probabilities()
    };
    if noise.enabled {
        apply_readout_flips(&mut probs, c.n_qubits(), noise.p_readout_flip);
    }
    Ok(probs)
}

/// MMD expressibility. With `noise.enabled` this is the noisy label.
///
/// Parameter draws come before simplex draws on `rng`, so the noiseless and
/// noisy labels computed from equal seeds share both sample sets.
pub fn exp2<R: Rng + ?Sized>(c: &Circuit, cfg: &ExpConfig, noise: &NoiseConfig, rng: &mut R) -> Result<f64> {
    let params: Vec<ParamAssignment> = (0..cfg.mmd_samples).map(|_| sample_params(c, rng)).collect();
    let dim = 1usize << c.n_qubits();
    let mut simplex = sample_simplex_uniform(dim, cfg.mmd_samples, rng)?;
    let x = params
        .par_iter()
        .map(|p| {
            let mut probs = output_distribution(c, p, noise)?;
            if !cfg.full_vector {
                probs.truncate(dim - 1);
            }
            Ok(probs)
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.full_vector {
        for v in &mut simplex {
            let rest = 1.0 - v.iter().sum::<f64>();
            v.push(rest);
        }
    }
    mmd_expressibility(&x, &simplex, cfg.kernel_sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Exp1,
    Exp1r,
    Exp2,
    Exp2Noisy,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Exp1, Measure::Exp1r, Measure::Exp2, Measure::Exp2Noisy];

    pub fn column(&self) -> &'static str {
        match self {
            Measure::Exp1 => "exp1",
            Measure::Exp1r => "exp1r",
            Measure::Exp2 => "exp2",
            Measure::Exp2Noisy => "exp2_noisy",
        }
    }

    /// Accepts column names and their dashed spellings (`exp2-noisy`).
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exp1" => Ok(Measure::Exp1),
            "exp1r" => Ok(Measure::Exp1r),
            "exp2" => Ok(Measure::Exp2),
            "exp2_noisy" => Ok(Measure::Exp2Noisy),
            other => Err(invalid(format!("unknown measure {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpressibilityLabels {
    pub exp1: Option<f64>,
    pub exp1r: Option<f64>,
    pub exp2: Option<f64>,
    pub exp2_noisy: Option<f64>,
}

impl ExpressibilityLabels {
    pub fn get(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Exp1 => self.exp1,
            Measure::Exp1r => self.exp1r,
            Measure::Exp2 => self.exp2,
            Measure::Exp2Noisy => self.exp2_noisy,
        }
    }
}

/// Compute the requested labels for one circuit from a per-circuit seed.
/// `exp1r` reuses the `exp1` histogram; both MMD labels share one stream.
pub fn compute_labels(
    c: &Circuit,
    cfg: &ExpConfig,
    noise: &NoiseConfig,
    measures: &[Measure],
    circuit_seed: u64,
) -> Result<ExpressibilityLabels> {
    cfg.validate()?;
    let mut out = ExpressibilityLabels::default();
    let wants = |m| measures.contains(&m);
    if wants(Measure::Exp1) || wants(Measure::Exp1r) {
        let v = exp1(c, cfg, &mut rng_from_seed(derive_seed(circuit_seed, "exp1")))?;
        if wants(Measure::Exp1) {
            out.exp1 = Some(v);
        }
        if wants(Measure::Exp1r) {
            out.exp1r = Some(exp1_relative(v.max(cfg.exp1_floor), c.n_qubits(), cfg.n_bins)?);
        }
    }
    let mmd_seed = derive_seed(circuit_seed, "exp2");
    if wants(Measure::Exp2) {
        out.exp2 = Some(exp2(c, cfg, &NoiseConfig::disabled(), &mut rng_from_seed(mmd_seed))?);
    }
    if wants(Measure::Exp2Noisy) {
        let noisy = NoiseConfig { enabled: true, ..*noise };
        out.exp2_noisy = Some(exp2(c, cfg, &noisy, &mut rng_from_seed(mmd_seed))?);
    }
    Ok(out)
}
