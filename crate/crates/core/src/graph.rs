//! DAG encoding of circuits.
//!
//! Nodes are `Start`, the gates in circuit order, then `End`. An edge
//! `a → b` means some qubit touched by `a` is next touched by `b`. Feature
//! rows (layout `v1`) are a one-hot gate class `{Start, End, U3, CZ}`
//! followed by a qubit-incidence block of width [`MAX_QUBITS`].

use serde::{Deserialize, Serialize};

use crate::circuit::{ring_adjacent, Circuit, Gate};
use crate::error::{invalid, Error, Result};

pub const LAYOUT_VERSION: &str = "v1";
pub const MAX_QUBITS: usize = 6;
pub const N_CLASSES: usize = 4;
pub const FEATURE_DIM: usize = N_CLASSES + MAX_QUBITS;

const CLASS_START: usize = 0;
const CLASS_END: usize = 1;
const CLASS_U3: usize = 2;
const CLASS_CZ: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitGraph {
    pub n_qubits: usize,
    pub n_nodes: usize,
    /// `n_nodes × FEATURE_DIM`, entries in {0, 1}.
    pub features: Vec<Vec<f64>>,
    /// `n_nodes × n_nodes` 0/1 matrix, row = source.
    pub adjacency: Vec<Vec<u8>>,
}

impl CircuitGraph {
    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&a| a != 0).count()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.adjacency.iter().filter(|row| row[node] != 0).count()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.adjacency[node].iter().filter(|&&a| a != 0).count()
    }
}

/// Directed qubit-successor edges including Start/End, before duplicates
/// are collapsed. Node ids follow the canonical order.
pub fn raw_edges(c: &Circuit) -> Vec<(usize, usize)> {
    let end = c.gates().len() + 1;
    let mut last = vec![0usize; c.n_qubits()];
    let mut edges = Vec::new();
    for (k, g) in c.gates().iter().enumerate() {
        let node = k + 1;
        for q in g.qubits() {
            edges.push((last[q], node));
            last[q] = node;
        }
    }
    edges.extend(last.into_iter().map(|src| (src, end)));
    edges
}

pub fn encode_graph(c: &Circuit) -> Result<CircuitGraph> {
    let n = c.n_qubits();
    if n > MAX_QUBITS {
        return Err(invalid(format!("layout {LAYOUT_VERSION} supports at most {MAX_QUBITS} qubits, got {n}")));
    }
    let n_nodes = c.gates().len() + 2;
    let mut features = vec![vec![0.0; FEATURE_DIM]; n_nodes];
    features[0][CLASS_START] = 1.0;
    features[n_nodes - 1][CLASS_END] = 1.0;
    for q in 0..n {
        features[0][N_CLASSES + q] = 1.0;
        features[n_nodes - 1][N_CLASSES + q] = 1.0;
    }
    for (k, g) in c.gates().iter().enumerate() {
        let row = &mut features[k + 1];
        row[if g.is_u3() { CLASS_U3 } else { CLASS_CZ }] = 1.0;
        for q in g.qubits() {
            row[N_CLASSES + q] = 1.0;
        }
    }
    let mut adjacency = vec![vec![0u8; n_nodes]; n_nodes];
    for (a, b) in raw_edges(c) {
        adjacency[a][b] = 1;
    }
    Ok(CircuitGraph { n_qubits: n, n_nodes, features, adjacency })
}

/// Rebuild the gate list from the feature rows. CZ orientation follows the
/// generator's ring convention `(i, i+1 mod N)`.
pub fn decode_graph(g: &CircuitGraph) -> Result<Circuit> {
    let bad = |msg: String| Error::Schema(format!("cannot decode graph: {msg}"));
    if g.n_nodes < 2 || g.features.len() != g.n_nodes || g.adjacency.len() != g.n_nodes {
        return Err(bad(format!("inconsistent node count {}", g.n_nodes)));
    }
    let incidence = |row: &[f64]| -> Vec<usize> {
        (0..MAX_QUBITS).filter(|&q| row[N_CLASSES + q] != 0.0).collect()
    };
    let n = incidence(&g.features[0]).len();
    if g.features[0][CLASS_START] != 1.0 || g.features[g.n_nodes - 1][CLASS_END] != 1.0 {
        return Err(bad("missing Start/End rows".into()));
    }
    let mut gates = Vec::with_capacity(g.n_nodes - 2);
    for (k, row) in g.features[1..g.n_nodes - 1].iter().enumerate() {
        let qs = incidence(row);
        let gate = match (row[CLASS_U3] != 0.0, row[CLASS_CZ] != 0.0, qs.as_slice()) {
            (true, false, [t]) => Gate::U3 { target: *t },
            (false, true, [a, b]) if ring_adjacent(*a, *b, n) => {
                if b - a == 1 {
                    Gate::Cz { control: *a, target: *b }
                } else {
                    Gate::Cz { control: *b, target: *a }
                }
            }
            _ => return Err(bad(format!("node {} has an unrecognised feature row", k + 1))),
        };
        gates.push(gate);
    }
    Circuit::new(n, gates)
}

/// Graphs zero-padded to a common node count.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    pub batch_size: usize,
    pub max_nodes: usize,
    pub feature_dim: usize,
    /// `batch × max_nodes × feature_dim`, flat.
    pub features: Vec<f64>,
    /// `batch × max_nodes × max_nodes`, flat.
    pub adjacency: Vec<f64>,
    /// `batch × max_nodes`, true on real nodes.
    pub mask: Vec<bool>,
}

impl PaddedBatch {
    pub fn n_nodes(&self, b: usize) -> usize {
        self.mask[b * self.max_nodes..(b + 1) * self.max_nodes].iter().filter(|m| **m).count()
    }

    pub fn feature_row(&self, b: usize, node: usize) -> &[f64] {
        let start = (b * self.max_nodes + node) * self.feature_dim;
        &self.features[start..start + self.feature_dim]
    }

    pub fn adjacency_row(&self, b: usize, node: usize) -> &[f64] {
        let start = (b * self.max_nodes + node) * self.max_nodes;
        &self.adjacency[start..start + self.max_nodes]
    }

    /// Feature matrix of member `b` restricted to its real nodes.
    pub fn unpad_features(&self, b: usize) -> Vec<Vec<f64>> {
        (0..self.max_nodes)
            .filter(|&i| self.mask[b * self.max_nodes + i])
            .map(|i| self.feature_row(b, i).to_vec())
            .collect()
    }
}

pub fn pad_batch(graphs: &[&CircuitGraph]) -> Result<PaddedBatch> {
    let max_nodes = graphs.iter().map(|g| g.n_nodes).max().ok_or_else(|| invalid("cannot pad an empty batch"))?;
    pad_batch_to(graphs, max_nodes)
}

/// Pad to an explicit node count, which must cover every member.
pub fn pad_batch_to(graphs: &[&CircuitGraph], max_nodes: usize) -> Result<PaddedBatch> {
    if graphs.is_empty() {
        return Err(invalid("cannot pad an empty batch"));
    }
    let feature_dim = graphs[0].features.first().map_or(FEATURE_DIM, |r| r.len());
    let b = graphs.len();
    let mut features = vec![0.0; b * max_nodes * feature_dim];
    let mut adjacency = vec![0.0; b * max_nodes * max_nodes];
    let mut mask = vec![false; b * max_nodes];
    for (gi, g) in graphs.iter().enumerate() {
        if g.n_nodes > max_nodes {
            return Err(invalid(format!("graph with {} nodes exceeds padding {max_nodes}", g.n_nodes)));
        }
        for i in 0..g.n_nodes {
            if g.features[i].len() != feature_dim {
                return Err(invalid("graphs in a batch have different feature widths"));
            }
            mask[gi * max_nodes + i] = true;
            let f0 = (gi * max_nodes + i) * feature_dim;
            features[f0..f0 + feature_dim].copy_from_slice(&g.features[i]);
            let a0 = (gi * max_nodes + i) * max_nodes;
            for j in 0..g.n_nodes {
                adjacency[a0 + j] = g.adjacency[i][j] as f64;
            }
        }
    }
    Ok(PaddedBatch { batch_size: b, max_nodes, feature_dim, features, adjacency, mask })
}
