use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::indicators::Normalization;
use crate::reduction::ReductionConfig;
use crate::rnn::{CellKind, ModelConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub cells: Vec<CellKind>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { cells: CellKind::ALL.to_vec(), embed_dim: 50, hidden_dim: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Number of validation sequences measured (`S`).
    pub sequences: usize,
    pub w_min: usize,
    /// Defaults to the sequence length.
    pub w_max: Option<usize>,
    pub normalization: Normalization,
    /// Also report the hit ratio measured in the unreduced space.
    pub cihr_nd: bool,
    /// Replace hidden states by the inputs; every indicator should be ideal.
    pub identity_debug: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sequences: 200,
            w_min: 1,
            w_max: None,
            normalization: Normalization::PerLength,
            cihr_nd: false,
            identity_debug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpttSweepConfig {
    pub values: Vec<usize>,
}

impl Default for BpttSweepConfig {
    fn default() -> Self {
        Self { values: vec![5, 10, 15, 20, 25, 30, 35] }
    }
}

/// Everything a study needs; the report is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; model initialisation and reduction both derive from it.
    pub seed: u64,
    pub out: PathBuf,
    pub corpus: CorpusConfig,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub reduction: ReductionConfig,
    pub eval: EvalConfig,
    pub bptt_sweep: BpttSweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            corpus: CorpusConfig::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            reduction: ReductionConfig::default(),
            eval: EvalConfig::default(),
            bptt_sweep: BpttSweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.in_stage(format!("config {}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.cells.is_empty() {
            return Err(Error::Config("model.cells is empty".into()));
        }
        if self.corpus.bptt == 0 {
            return Err(Error::Config("corpus.bptt must be positive".into()));
        }
        if self.eval.sequences == 0 {
            return Err(Error::Config("eval.sequences must be at least 1".into()));
        }
        let (lo, hi) = self.window_bounds();
        if lo == 0 || lo > hi || hi > self.corpus.bptt {
            return Err(Error::Config(format!("window range {lo}..={hi} must lie within 1..={}", self.corpus.bptt)));
        }
        if self.bptt_sweep.values.is_empty() || self.bptt_sweep.values.contains(&0) {
            return Err(Error::Config("bptt_sweep.values must be non-empty and positive".into()));
        }
        self.model_config(self.model.cells[0], 2).validate()?;
        self.reduction_config().validate()
    }

    pub fn window_bounds(&self) -> (usize, usize) {
        (self.eval.w_min, self.eval.w_max.unwrap_or(self.corpus.bptt))
    }

    pub fn window_lengths(&self) -> Vec<usize> {
        let (lo, hi) = self.window_bounds();
        (lo..=hi).collect()
    }

    pub fn model_config(&self, cell: CellKind, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            cell,
            embed_dim: self.model.embed_dim,
            hidden_dim: self.model.hidden_dim,
            bptt: self.corpus.bptt,
            vocab_size,
            seed: self.seed,
        }
    }

    pub fn reduction_config(&self) -> ReductionConfig {
        ReductionConfig { seed: self.seed, ..self.reduction.clone() }
    }

    /// `(key, value)` pairs of every leaf, keys dotted from the table path.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
            match v {
                toml::Value::Table(t) => {
                    for (k, v) in t {
                        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&key, v, out);
                    }
                }
                toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
                other => out.push((prefix.to_string(), other.to_string())),
            }
        }
        let value = toml::Value::try_from(self).expect("config serialises");
        let mut out = Vec::new();
        walk("", &value, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.window_lengths().len(), 35);
    }

    #[test]
    fn partial_tables_and_unknown_keys() {
        let cfg = ExperimentConfig::from_toml("seed = 9\n[eval]\nsequences = 4\nw_max = 10\n").unwrap();
        assert_eq!((cfg.seed, cfg.eval.sequences, cfg.window_bounds()), (9, 4, (1, 10)));
        assert_eq!(cfg.reduction_config().seed, 9);
        assert!(ExperimentConfig::from_toml("[eval]\nsequencez = 4\n").is_err());
        assert!(ExperimentConfig::from_toml("[eval]\nw_max = 40\n").is_err());
        assert!(ExperimentConfig::from_toml("[model]\nembed_dim = 20\n").is_err());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let mut cfg = ExperimentConfig::default();
        cfg.eval.w_max = Some(12);
        cfg.model.cells = vec![CellKind::Gru];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(ExperimentConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn flattened_keys() {
        let flat = ExperimentConfig::default().flatten();
        let get = |k: &str| flat.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        assert_eq!(get("eval.sequences").as_deref(), Some("200"));
        assert_eq!(get("train.learning_rate").as_deref(), Some("20.0"));
        assert_eq!(get("corpus.path").as_deref(), Some("data/ptb"));
    }
}
