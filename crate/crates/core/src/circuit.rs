//! Circuits over the {U3, CZ} gate set and the gatewise random generator.
//!
//! Connectivity is a ring: CZ may only act on `(i, i + 1 mod N)`. Every
//! generated circuit opens with one U3 per qubit, since a leading CZ acts
//! trivially on `|0…0⟩`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    U3 { target: usize },
    Cz { control: usize, target: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { target } => vec![target],
            Gate::Cz { control, target } => vec![control, target],
        }
    }

    pub fn is_u3(&self) -> bool {
        matches!(self, Gate::U3 { .. })
    }
}

/// True when `a` and `b` are neighbours on an `n`-qubit ring.
pub fn ring_adjacent(a: usize, b: usize, n: usize) -> bool {
    if a == b || a >= n || b >= n {
        return false;
    }
    a.abs_diff(b) == 1 || (a.min(b) == 0 && a.max(b) == n - 1)
}

/// Distinct ring edges `(i, i+1 mod n)`, deduplicated for `n = 2`.
pub fn ring_edges(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// An ordered gate list over `n_qubits`. Holds structure only; rotation
/// angles are drawn at simulation time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    /// Build a circuit, checking qubit bounds and ring adjacency of every CZ.
    ///
    /// The leading-U3-layer rule is not enforced here so that hand-built
    /// fixtures (idle circuits, bare CZ) stay representable; see
    /// [`Circuit::has_leading_u3_layer`].
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(invalid("circuit needs at least one qubit"));
        }
        for (i, g) in gates.iter().enumerate() {
            match *g {
                Gate::U3 { target } if target >= n_qubits => {
                    return Err(invalid(format!(
                        "gate {i}: U3 target {target} out of range for {n_qubits} qubits"
                    )));
                }
                Gate::Cz { control, target } if control == target => {
                    return Err(invalid(format!("gate {i}: CZ control equals target ({target})")));
                }
                Gate::Cz { control, target } if !ring_adjacent(control, target, n_qubits) => {
                    return Err(invalid(format!(
                        "gate {i}: CZ({control},{target}) is not a ring edge for {n_qubits} qubits"
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_u3(&self) -> usize {
        self.gates.iter().filter(|g| g.is_u3()).count()
    }

    pub fn has_leading_u3_layer(&self) -> bool {
        self.gates.len() >= self.n_qubits
            && self.gates[..self.n_qubits]
                .iter()
                .enumerate()
                .all(|(q, g)| *g == Gate::U3 { target: q })
    }

    pub fn stats(&self) -> CircuitStats {
        circuit_stats(self)
    }

    pub fn to_record(&self, id: &str) -> CircuitRecord {
        CircuitRecord {
            id: id.to_string(),
            n_qubits: self.n_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| match *g {
                    Gate::U3 { target } => GateRecord { t: "U3".into(), q: vec![target] },
                    Gate::Cz { control, target } => GateRecord { t: "CZ".into(), q: vec![control, target] },
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitStats {
    pub depth: usize,
    pub n_gates: usize,
    pub n_u3: usize,
    pub n_cz: usize,
    pub n_params: usize,
}

/// Counts plus ASAP depth: each gate lands one layer after the latest gate
/// already touching any of its qubits.
pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    let mut frontier = vec![0usize; c.n_qubits];
    let mut n_u3 = 0;
    for g in &c.gates {
        match *g {
            Gate::U3 { target } => {
                n_u3 += 1;
                frontier[target] += 1;
            }
            Gate::Cz { control, target } => {
                let layer = frontier[control].max(frontier[target]) + 1;
                frontier[control] = layer;
                frontier[target] = layer;
            }
        }
    }
    let n_gates = c.gates.len();
    CircuitStats {
        depth: frontier.into_iter().max().unwrap_or(0),
        n_gates,
        n_u3,
        n_cz: n_gates - n_u3,
        n_params: 3 * n_u3,
    }
}

/// Wire format of one gate: `{"t": "U3"|"CZ", "q": [..]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRecord {
    pub t: String,
    pub q: Vec<usize>,
}

/// One line of a circuits file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub id: String,
    pub n_qubits: usize,
    pub gates: Vec<GateRecord>,
}

impl CircuitRecord {
    pub fn to_circuit(&self) -> Result<Circuit> {
        let gates = self
            .gates
            .iter()
            .enumerate()
            .map(|(i, g)| match (g.t.as_str(), g.q.as_slice()) {
                ("U3", [t]) => Ok(Gate::U3 { target: *t }),
                ("CZ", [c, t]) => Ok(Gate::Cz { control: *c, target: *t }),
                (t, q) => Err(Error::Schema(format!(
                    "record {}: gate {i} has unknown shape (t={t:?}, {} qubits)",
                    self.id,
                    q.len()
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Circuit::new(self.n_qubits, gates)
            .map_err(|e| Error::Schema(format!("record {}: {e}", self.id)))
    }
}

/// Knobs of the gatewise sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewiseParams {
    /// Standard deviation of the per-type scores.
    pub gate_type_sigma: f64,
    /// Standard deviation of the per-position scores.
    pub position_sigma: f64,
}

impl Default for GatewiseParams {
    fn default() -> Self {
        Self { gate_type_sigma: 1.35, position_sigma: 1.0 }
    }
}

fn softmax_sample<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Generate one random circuit with the gatewise rule.
///
/// After the mandatory U3 layer, every slot draws one Gaussian score per
/// gate type, samples the type from their softmax, then draws one score per
/// legal position (qubit for U3, ring edge for CZ) and samples the position
/// the same way.
pub fn generate_circuit<R: Rng + ?Sized>(
    n_qubits: usize,
    n_gates: usize,
    params: &GatewiseParams,
    rng: &mut R,
) -> Result<Circuit> {
    if n_qubits < 2 {
        return Err(invalid(format!("gatewise generation needs at least 2 qubits, got {n_qubits}")));
    }
    if n_gates < n_qubits {
        return Err(invalid(format!(
            "{n_gates} gates cannot hold the leading U3 layer of {n_qubits} qubits"
        )));
    }
    let type_dist = Normal::new(0.0, params.gate_type_sigma)
        .map_err(|e| invalid(format!("gate_type_sigma: {e}")))?;
    let pos_dist = Normal::new(0.0, params.position_sigma)
        .map_err(|e| invalid(format!("position_sigma: {e}")))?;
    let edges = ring_edges(n_qubits);

    let mut gates: Vec<Gate> = (0..n_qubits).map(|q| Gate::U3 { target: q }).collect();
    while gates.len() < n_gates {
        let type_scores = [type_dist.sample(rng), type_dist.sample(rng)];
        let gate = if softmax_sample(&type_scores, rng) == 0 {
            let scores: Vec<f64> = (0..n_qubits).map(|_| pos_dist.sample(rng)).collect();
            Gate::U3 { target: softmax_sample(&scores, rng) }
        } else {
            let scores: Vec<f64> = (0..edges.len()).map(|_| pos_dist.sample(rng)).collect();
            let (control, target) = edges[softmax_sample(&scores, rng)];
            Gate::Cz { control, target }
        };
        gates.push(gate);
    }
    Circuit::new(n_qubits, gates)
}

/// Gate-count sweep for one qubit count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitGroup {
    pub n_qubits: usize,
    pub gate_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub groups: Vec<QubitGroup>,
    pub per_pair: usize,
    pub gatewise: GatewiseParams,
}

impl DatasetSpec {
    /// Gate-count range used for `n_qubits` in the published dataset:
    /// 20 consecutive counts starting at `5 * n_qubits - 10`.
    pub fn table_gate_counts(n_qubits: usize) -> Vec<usize> {
        let lo = 5 * n_qubits - 10;
        (lo..lo + 20).collect()
    }

    /// 4, 5 and 6 qubits, 20 gate counts each, `per_pair` circuits per pair.
    pub fn table(per_pair: usize) -> Self {
        Self::for_qubits(&[4, 5, 6], per_pair)
    }

    pub fn for_qubits(qubits: &[usize], per_pair: usize) -> Self {
        Self {
            groups: qubits
                .iter()
                .map(|&n| QubitGroup { n_qubits: n, gate_counts: Self::table_gate_counts(n.max(2)) })
                .collect(),
            per_pair,
            gatewise: GatewiseParams::default(),
        }
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.gate_counts.len() * self.per_pair).sum()
    }
}

pub fn circuit_id(n_qubits: usize, n_gates: usize, index: usize) -> String {
    format!("q{n_qubits}-g{n_gates}-{index:04}")
}

/// Generate the whole circuit family. Each `(qubits, gates)` pair draws from
/// its own stream derived from `master_seed`, so the output does not depend
/// on how the pairs are scheduled.
pub fn generate_dataset_circuits(spec: &DatasetSpec, master_seed: u64) -> Result<Vec<(String, Circuit)>> {
    if spec.groups.iter().any(|g| g.gate_counts.is_empty()) {
        return Err(invalid("every qubit group needs at least one gate count"));
    }
    let pairs: Vec<(usize, usize)> = spec
        .groups
        .iter()
        .flat_map(|g| g.gate_counts.iter().map(move |&k| (g.n_qubits, k)))
        .collect();
    let chunks = pairs
        .par_iter()
        .map(|&(n, k)| {
            let mut rng = rng_from_seed(derive_seed(master_seed, &format!("generate/q{n}/g{k}")));
            (0..spec.per_pair)
                .map(|i| Ok((circuit_id(n, k, i), generate_circuit(n, k, &spec.gatewise, &mut rng)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
