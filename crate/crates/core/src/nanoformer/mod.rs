//! A small graph transformer regressor with hand-written reverse mode.
//!
//! Per node, a gate-feature embedding and an adjacency-row embedding are
//! summed, passed through `n_layers` post-norm encoder layers
//! (`LN(x + drop(MSA(x)))`, then `LN(x + drop(ReLU(Wx + b)))`), pooled over
//! the real nodes and mapped to a scalar by a LeakyReLU MLP head.

mod model;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::FEATURE_DIM;

pub use model::{backward, forward, forward_traced, mse_loss, BatchGradient, ForwardMode, GraphTrace};
pub use optim::{adam_step, cosine_lr, AdamConfig, AdamState};
pub use params::{init_model, parameter_count, LayerNorm, Linear, EncoderLayer, ModelParams};
pub use train::{train, Regressor, TrainConfig, TrainHistory, TrainOutcome, TrainSample, EpochRecord};

/// Which adjacency vector embeds a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyInput {
    /// Row `i` of the adjacency matrix (successors of node `i`).
    OutRow,
    /// Column `i` (predecessors of node `i`).
    InRow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    MeanPool,
    EndNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_heads: usize,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    /// Hidden widths of the FC head; the final `→ 1` layer is implicit.
    pub fc_dims: Vec<usize>,
    pub feature_dim: usize,
    pub max_nodes: usize,
    pub leaky_slope: f64,
    pub adjacency_input: AdjacencyInput,
    pub readout: Readout,
}

/// Largest gate count in the published dataset (39) plus Start/End.
pub const DEFAULT_MAX_NODES: usize = 41;

impl ModelConfig {
    pub fn new(n_heads: usize, n_layers: usize, hidden_dim: usize) -> Self {
        Self {
            n_heads,
            n_layers,
            hidden_dim,
            dropout_rate: 0.1,
            fc_dims: vec![(hidden_dim / 2).max(1)],
            feature_dim: FEATURE_DIM,
            max_nodes: DEFAULT_MAX_NODES,
            leaky_slope: 0.01,
            adjacency_input: AdjacencyInput::OutRow,
            readout: Readout::MeanPool,
        }
    }

    /// Parse a `heads-layers-hidden` string such as `1-2-32`.
    pub fn from_structure(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('-')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| invalid(format!("structure {s:?} is not heads-layers-hidden")))?;
        match parts.as_slice() {
            [h, l, d] => {
                let cfg = Self::new(*h, *l, *d);
                cfg.validate()?;
                Ok(cfg)
            }
            _ => Err(invalid(format!("structure {s:?} is not heads-layers-hidden"))),
        }
    }

    pub fn structure(&self) -> String {
        format!("{}-{}-{}", self.n_heads, self.n_layers, self.hidden_dim)
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.n_layers == 0 || self.hidden_dim == 0 {
            return Err(invalid("heads, layers and hidden_dim must be at least 1"));
        }
        if self.hidden_dim % self.n_heads != 0 {
            return Err(invalid(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.n_heads
            )));
        }
        if self.fc_dims.iter().any(|&d| d == 0) || self.feature_dim == 0 || self.max_nodes == 0 {
            return Err(invalid("all dimensions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

/// The structure grid `{1,2} heads × {1,2} layers × {16,32} hidden`.
pub fn structure_grid() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for h in [1, 2] {
        for l in [1, 2] {
            for d in [16, 32] {
                out.push(ModelConfig::new(h, l, d));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_round_trip() {
        let c = ModelConfig::from_structure("2-1-32").unwrap();
        assert_eq!((c.n_heads, c.n_layers, c.hidden_dim), (2, 1, 32));
        assert_eq!(c.structure(), "2-1-32");
        assert_eq!(c.fc_dims, vec![16]);
        assert!(ModelConfig::from_structure("3-1-16").is_err());
        assert!(ModelConfig::from_structure("1-1").is_err());
        assert!(ModelConfig::from_structure("a-b-c").is_err());
        assert_eq!(structure_grid().len(), 8);
    }
}
