//! Exact small-register simulation.
//!
//! Qubit 0 is the most significant bit of a basis-state index. Pure states
//! are dense amplitude vectors; mixed states are dense row-major density
//! matrices, which at six qubits is a 64×64 complex array.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{invalid, Result};

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];

/// Standard U3 convention:
/// `[[cos(θ/2), −e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+λ)} cos(θ/2)]]`.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ]
}

/// One `(θ, φ, λ)` triple per U3 gate, in circuit order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamAssignment {
    pub angles: Vec<[f64; 3]>,
}

impl ParamAssignment {
    pub fn n_angles(&self) -> usize {
        3 * self.angles.len()
    }
}

/// Draw every angle independently from `[0, 2π)`.
pub fn sample_params<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> ParamAssignment {
    let angles = (0..c.n_u3())
        .map(|_| [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU, rng.random::<f64>() * TAU])
        .collect();
    ParamAssignment { angles }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialState {
    AllZero,
    AllPlus,
}

#[inline]
fn qubit_mask(n_qubits: usize, q: usize) -> usize {
    1 << (n_qubits - 1 - q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(n_qubits: usize, initial: InitialState) -> Self {
        let dim = 1usize << n_qubits;
        let amps = match initial {
            InitialState::AllZero => {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[0] = C64::new(1.0, 0.0);
                v
            }
            InitialState::AllPlus => vec![C64::new((dim as f64).sqrt().recip(), 0.0); dim],
        };
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(invalid(format!("{} amplitudes for {n_qubits} qubits", amps.len())));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_1q(&mut self, q: usize, u: &Mat2) {
        let m = qubit_mask(self.n_qubits, q);
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[i | m] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let m = qubit_mask(self.n_qubits, a) | qubit_mask(self.n_qubits, b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
    }

    pub fn to_density(&self) -> DensityState {
        let dim = self.amps.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = self.amps[r] * self.amps[c].conj();
            }
        }
        DensityState { n_qubits: self.n_qubits, dim, data }
    }
}

/// Dense density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    dim: usize,
    data: Vec<C64>,
}

impl DensityState {
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Self { n_qubits, dim, data }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ_rc ρ_rc ρ_cr = Σ |ρ_rc|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    fn apply_1q(&mut self, q: usize, u: &Mat2) {
        let (d, m) = (self.dim, qubit_mask(self.n_qubits, q));
        // U ρ
        for c in 0..d {
            for r in 0..d {
                if r & m == 0 {
                    let (a, b) = (self.data[r * d + c], self.data[(r | m) * d + c]);
                    self.data[r * d + c] = u[0][0] * a + u[0][1] * b;
                    self.data[(r | m) * d + c] = u[1][0] * a + u[1][1] * b;
                }
            }
        }
        // (U ρ) U†
        for r in 0..d {
            let row = &mut self.data[r * d..(r + 1) * d];
            for c in 0..d {
                if c & m == 0 {
                    let (a, b) = (row[c], row[c | m]);
                    row[c] = a * u[0][0].conj() + b * u[0][1].conj();
                    row[c | m] = a * u[1][0].conj() + b * u[1][1].conj();
                }
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let m = qubit_mask(self.n_qubits, a) | qubit_mask(self.n_qubits, b);
        let d = self.dim;
        for r in 0..d {
            for c in 0..d {
                if (r & m == m) != (c & m == m) {
                    self.data[r * d + c] = -self.data[r * d + c];
                }
            }
        }
    }

    /// `ρ → (1−p)ρ + p · tr_S(ρ) ⊗ I_S / 2^|S|` for the qubit subset `S`
    /// given by `mask`.
    fn depolarize(&mut self, mask: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim;
        let subs: Vec<usize> = (0..d).filter(|s| s & !mask == 0).collect();
        let share = p / subs.len() as f64;
        let keep = 1.0 - p;
        for r0 in (0..d).filter(|r| r & mask == 0) {
            for c0 in (0..d).filter(|c| c & mask == 0) {
                let t: C64 = subs.iter().map(|&s| self.data[(r0 | s) * d + (c0 | s)]).sum();
                for &s1 in &subs {
                    for &s2 in &subs {
                        let idx = (r0 | s1) * d + (c0 | s2);
                        self.data[idx] *= keep;
                        if s1 == s2 {
                            self.data[idx] += t * share;
                        }
                    }
                }
            }
        }
    }
}

/// How CZ noise is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CzNoiseMode {
    /// One two-qubit depolarizing channel on the pair.
    Pair,
    /// Independent single-qubit channels on each qubit.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_u3: f64,
    pub p_cz: f64,
    pub p_readout_flip: f64,
    pub enabled: bool,
    pub cz_mode: CzNoiseMode,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { p_u3: 0.001, p_cz: 0.01, p_readout_flip: 0.01, enabled: true, cz_mode: CzNoiseMode::Pair }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_u3", self.p_u3), ("p_cz", self.p_cz), ("p_readout_flip", self.p_readout_flip)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub(crate) fn gate_noise_free(&self) -> bool {
        !self.enabled || (self.p_u3 == 0.0 && self.p_cz == 0.0)
    }
}

fn check_params(c: &Circuit, p: &ParamAssignment) -> Result<()> {
    if p.angles.len() != c.n_u3() {
        return Err(invalid(format!(
            "circuit has {} U3 gates but {} angle triples were supplied",
            c.n_u3(),
            p.angles.len()
        )));
    }
    Ok(())
}

/// Apply the circuit to a product initial state.
pub fn run_pure(c: &Circuit, p: &ParamAssignment, initial: InitialState) -> Result<PureState> {
    check_params(c, p)?;
    let mut state = PureState::new(c.n_qubits(), initial);
    let mut angles = p.angles.iter();
    for g in c.gates() {
        match *g {
            Gate::U3 { target } => {
                let [t, ph, l] = *angles.next().expect("checked");
                state.apply_1q(target, &u3_matrix(t, ph, l));
            }
            Gate::Cz { control, target } => state.apply_cz(control, target),
        }
    }
    Ok(state)
}

/// Density-matrix evolution with a depolarizing channel after every gate.
/// Readout flips are not part of the state; see [`measurement_distribution`].
pub fn run_noisy(c: &Circuit, p: &ParamAssignment, noise: &NoiseConfig, initial: InitialState) -> Result<DensityState> {
    check_params(c, p)?;
    noise.validate()?;
    let n = c.n_qubits();
    let mut rho = PureState::new(n, initial).to_density();
    let (p_u3, p_cz) = if noise.enabled { (noise.p_u3, noise.p_cz) } else { (0.0, 0.0) };
    let mut angles = p.angles.iter();
    for g in c.gates() {
        match *g {
            Gate::U3 { target } => {
                let [t, ph, l] = *angles.next().expect("checked");
                rho.apply_1q(target, &u3_matrix(t, ph, l));
                rho.depolarize(qubit_mask(n, target), p_u3);
            }
            Gate::Cz { control, target } => {
                rho.apply_cz(control, target);
                match noise.cz_mode {
                    CzNoiseMode::Pair => {
                        rho.depolarize(qubit_mask(n, control) | qubit_mask(n, target), p_cz)
                    }
                    CzNoiseMode::Independent => {
                        rho.depolarize(qubit_mask(n, control), p_cz);
                        rho.depolarize(qubit_mask(n, target), p_cz);
                    }
                }
            }
        }
    }
    Ok(rho)
}

/// States that have computational-basis outcome probabilities.
pub trait BasisProbabilities {
    fn n_qubits(&self) -> usize;
    fn basis_probabilities(&self) -> Vec<f64>;
}

impl BasisProbabilities for PureState {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn basis_probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl BasisProbabilities for DensityState {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn basis_probabilities(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }
}

/// Flip each qubit's outcome independently with probability `p`.
pub fn apply_readout_flips(probs: &mut [f64], n_qubits: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    for q in 0..n_qubits {
        let m = qubit_mask(n_qubits, q);
        for i in 0..probs.len() {
            if i & m == 0 {
                let (a, b) = (probs[i], probs[i | m]);
                probs[i] = (1.0 - p) * a + p * b;
                probs[i | m] = p * a + (1.0 - p) * b;
            }
        }
    }
}

/// Basis-outcome distribution, with readout flips when `readout.enabled`.
pub fn measurement_distribution<S: BasisProbabilities + ?Sized>(state: &S, readout: &NoiseConfig) -> Vec<f64> {
    let mut probs = state.basis_probabilities();
    if readout.enabled {
        apply_readout_flips(&mut probs, state.n_qubits(), readout.p_readout_flip);
    }
    probs
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    if a.amps.len() != b.amps.len() {
        return Err(invalid(format!("fidelity of {}- and {}-dim states", a.amps.len(), b.amps.len())));
    }
    let overlap: C64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(overlap.norm_sqr().clamp(0.0, 1.0))
}
