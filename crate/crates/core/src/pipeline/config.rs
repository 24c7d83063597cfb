use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{DatasetSpec, GatewiseParams};
use crate::error::{Error, Result};
use crate::expressibility::{ExpConfig, Measure};
use crate::nanoformer::{AdamConfig, AdjacencyInput, ModelConfig, Readout, TrainConfig};
use crate::seed::derive_seed;
use crate::sim::{CzNoiseMode, NoiseConfig};

/// Every tunable of every stage, as one flat key/value document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,

    pub qubits: Vec<usize>,
    pub per_count: usize,
    pub gate_type_sigma: f64,
    pub position_sigma: f64,

    pub measures: Vec<String>,
    pub n_fidelity_samples: usize,
    pub n_bins: usize,
    pub mmd_samples: usize,
    pub kernel_sigma: f64,
    pub full_vector: bool,
    pub exp1_floor: f64,
    pub noise_enabled: bool,
    pub p_u3: f64,
    pub p_cz: f64,
    pub p_readout_flip: f64,
    pub cz_noise_mode: CzNoiseMode,

    pub structure: String,
    pub dropout_rate: f64,
    pub adjacency_input: AdjacencyInput,
    pub readout: Readout,
    pub max_nodes: usize,

    pub target: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub split: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub normalize_target: bool,
    pub runs: usize,
    /// Draw a fresh train/test split for every run instead of one shared split.
    pub resplit_per_run: bool,

    pub per_qubit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExpConfig::default();
        let noise = NoiseConfig::default();
        let gw = GatewiseParams::default();
        let model = ModelConfig::new(1, 1, 16);
        let train = TrainConfig::default();
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            qubits: vec![4, 5, 6],
            per_count: 500,
            gate_type_sigma: gw.gate_type_sigma,
            position_sigma: gw.position_sigma,
            measures: Measure::ALL.iter().map(|m| m.column().to_string()).collect(),
            n_fidelity_samples: exp.n_fidelity_samples,
            n_bins: exp.n_bins,
            mmd_samples: exp.mmd_samples,
            kernel_sigma: exp.kernel_sigma,
            full_vector: exp.full_vector,
            exp1_floor: exp.exp1_floor,
            noise_enabled: noise.enabled,
            p_u3: noise.p_u3,
            p_cz: noise.p_cz,
            p_readout_flip: noise.p_readout_flip,
            cz_noise_mode: noise.cz_mode,
            structure: model.structure(),
            dropout_rate: model.dropout_rate,
            adjacency_input: model.adjacency_input,
            readout: model.readout,
            max_nodes: model.max_nodes,
            target: train.target.column().to_string(),
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            split: train.split,
            adam_beta1: train.adam.beta1,
            adam_beta2: train.adam.beta2,
            adam_eps: train.adam.eps,
            normalize_target: train.normalize_target,
            runs: 1,
            resplit_per_run: true,
            per_qubit: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Write `<out>/<stage>.config.toml`.
    pub fn write_snapshot(&self, stage: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(format!("{stage}.config.toml"));
        fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        if self.qubits.is_empty() || self.qubits.iter().any(|&n| !(2..=crate::graph::MAX_QUBITS).contains(&n)) {
            return Err(Error::Config(format!(
                "qubits {:?} must be nonempty and within 2..={}",
                self.qubits,
                crate::graph::MAX_QUBITS
            )));
        }
        let mut spec = DatasetSpec::for_qubits(&self.qubits, self.per_count);
        spec.gatewise = GatewiseParams { gate_type_sigma: self.gate_type_sigma, position_sigma: self.position_sigma };
        Ok(spec)
    }

    pub fn measures(&self) -> Result<Vec<Measure>> {
        let mut out: Vec<Measure> = Vec::new();
        for m in &self.measures {
            let m = Measure::parse(m)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no measures requested".into()));
        }
        out.sort_by_key(|m| Measure::ALL.iter().position(|x| x == m));
        Ok(out)
    }

    pub fn exp_config(&self) -> Result<ExpConfig> {
        let cfg = ExpConfig {
            n_fidelity_samples: self.n_fidelity_samples,
            n_bins: self.n_bins,
            mmd_samples: self.mmd_samples,
            kernel_sigma: self.kernel_sigma,
            full_vector: self.full_vector,
            exp1_floor: self.exp1_floor,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noise_config(&self) -> Result<NoiseConfig> {
        let cfg = NoiseConfig {
            p_u3: self.p_u3,
            p_cz: self.p_cz,
            p_readout_flip: self.p_readout_flip,
            enabled: self.noise_enabled,
            cz_mode: self.cz_noise_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::from_structure(&self.structure)?;
        cfg.dropout_rate = self.dropout_rate;
        cfg.adjacency_input = self.adjacency_input;
        cfg.readout = self.readout;
        cfg.max_nodes = self.max_nodes;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn target_measure(&self) -> Result<Measure> {
        Measure::parse(&self.target)
    }

    /// Training settings of run `run`; each run gets its own derived seed.
    pub fn train_config(&self, run: usize) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            split: self.split,
            adam: AdamConfig { beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps },
            seed: derive_seed(self.seed, &format!("train/run{run}")),
            target: self.target_measure()?,
            normalize_target: self.normalize_target,
            split_seed: if self.resplit_per_run { None } else { Some(derive_seed(self.seed, "train/split")) },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_settings() {
        let c = RunConfig::default();
        assert_eq!((c.learning_rate, c.batch_size, c.epochs, c.split), (0.001, 64, 100, 0.8));
        assert_eq!((c.kernel_sigma, c.p_u3, c.p_cz, c.p_readout_flip), (0.01, 0.001, 0.01, 0.01));
        assert_eq!((c.n_fidelity_samples, c.n_bins), (5000, 75));
        assert_eq!(c.dataset_spec().unwrap().total(), 30_000);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let partial = RunConfig::from_toml("seed = 7\nstructure = \"1-2-32\"\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.model_config().unwrap().structure(), "1-2-32");
        assert!(RunConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn runs_get_distinct_seeds() {
        let c = RunConfig { seed: 3, ..RunConfig::default() };
        let seeds: Vec<u64> = (0..3).map(|r| c.train_config(r).unwrap().seed).collect();
        assert!(seeds[0] != seeds[1] && seeds[1] != seeds[2] && seeds[0] != seeds[2]);
        let fixed = RunConfig { resplit_per_run: false, ..c };
        assert_eq!(fixed.train_config(0).unwrap().split_seed, fixed.train_config(2).unwrap().split_seed);
    }

    #[test]
    fn measures_are_parsed_and_ordered() {
        let c = RunConfig { measures: vec!["exp2-noisy".into(), "exp2".into()], ..RunConfig::default() };
        assert_eq!(c.measures().unwrap(), vec![Measure::Exp2, Measure::Exp2Noisy]);
        let bad = RunConfig { measures: vec!["exp3".into()], ..RunConfig::default() };
        assert!(bad.measures().is_err());
    }
}
