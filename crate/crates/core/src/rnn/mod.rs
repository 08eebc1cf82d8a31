//! Tied-embedding recurrent language models with hand-derived gradients.
//!
//! The output projection is the embedding matrix itself, so hidden states and
//! word vectors live in one space and can be compared geometrically.

mod cells;
mod checkpoint;
mod model;
mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cells::{cell_step, CellState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use model::{forward_trace, loss_and_grads, perplexity, HiddenTrace, LossAndGrads};
pub use tensor::Matrix;
pub use train::{train, EpochRecord, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Vrnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Vrnn, CellKind::Lstm, CellKind::Gru];

    /// Number of `n x n` blocks in each of the input and recurrent matrices.
    pub fn gate_blocks(self) -> usize {
        match self {
            CellKind::Vrnn => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Vrnn => "vrnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vrnn" | "rnn" => Ok(CellKind::Vrnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::Config(format!("unknown cell type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub bptt: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(cell: CellKind, vocab_size: usize) -> Self {
        Self { cell, embed_dim: 50, hidden_dim: 50, bptt: 35, vocab_size, seed: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.bptt == 0 || self.vocab_size == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.hidden_dim != self.embed_dim {
            return Err(Error::Config(format!(
                "hidden_dim ({}) must equal embed_dim ({}) for a tied projection",
                self.hidden_dim, self.embed_dim
            )));
        }
        Ok(())
    }
}

/// Parameters of a tied model. The same layout holds gradients.
///
/// Gate blocks are stacked row-wise: LSTM `[input, forget, output, candidate]`,
/// GRU `[update, reset, candidate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub cell: CellKind,
    /// `V x n`; also the output projection.
    pub embedding: Matrix,
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub bias: Vec<f64>,
    pub out_bias: Vec<f64>,
}

pub const INIT_RANGE: f64 = 0.1;
pub const LSTM_FORGET_BIAS: f64 = 1.0;

impl ModelParams {
    pub fn zeros(cell: CellKind, vocab: usize, dim: usize) -> Self {
        let g = cell.gate_blocks();
        Self {
            cell,
            embedding: Matrix::zeros(vocab, dim),
            w_x: Matrix::zeros(g * dim, dim),
            w_h: Matrix::zeros(g * dim, dim),
            bias: vec![0.0; g * dim],
            out_bias: vec![0.0; vocab],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.cell, self.vocab_size(), self.dim())
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    /// The output projection; identically the embedding matrix.
    pub fn output_projection(&self) -> &Matrix {
        &self.embedding
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("embedding", self.embedding.as_slice()),
            ("w_x", self.w_x.as_slice()),
            ("w_h", self.w_h.as_slice()),
            ("bias", &self.bias),
            ("out_bias", &self.out_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            ("embedding", self.embedding.as_mut_slice()),
            ("w_x", self.w_x.as_mut_slice()),
            ("w_h", self.w_h.as_mut_slice()),
            ("bias", &mut self.bias),
            ("out_bias", &mut self.out_bias),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            tensor::axpy(alpha, src, dst);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Seeded uniform initialisation in `[-0.1, 0.1]`; biases zero, LSTM forget bias one.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut p = ModelParams::zeros(config.cell, config.vocab_size, config.embed_dim);
    for m in [&mut p.embedding, &mut p.w_x, &mut p.w_h] {
        for x in m.as_mut_slice() {
            *x = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
    }
    if config.cell == CellKind::Lstm {
        let n = config.hidden_dim;
        p.bias[n..2 * n].fill(LSTM_FORGET_BIAS);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::new(CellKind::Gru, 12);
        assert_eq!(init_params(&cfg).unwrap(), init_params(&cfg).unwrap());
        let other = ModelConfig { seed: 2, ..cfg.clone() };
        assert_ne!(init_params(&cfg).unwrap(), init_params(&other).unwrap());
    }

    #[test]
    fn parameter_counts() {
        let (v, n) = (10, 50);
        let vrnn = init_params(&ModelConfig::new(CellKind::Vrnn, v)).unwrap();
        assert_eq!(vrnn.param_count(), v * n + n * n + n * n + n + v);
        let lstm = init_params(&ModelConfig::new(CellKind::Lstm, v)).unwrap();
        assert_eq!(lstm.param_count(), 4 * n * n + 4 * n * n + 4 * n + v * n + v);
        assert_eq!((lstm.w_x.rows(), lstm.w_x.cols()), (4 * n, n));
        assert!(lstm.bias[n..2 * n].iter().all(|&b| b == 1.0));
        assert!(lstm.bias[..n].iter().all(|&b| b == 0.0));
        let gru = init_params(&ModelConfig::new(CellKind::Gru, v)).unwrap();
        assert_eq!(gru.param_count(), 3 * n * n * 2 + 3 * n + v * n + v);
    }

    #[test]
    fn init_range_and_zero_biases() {
        let p = init_params(&ModelConfig::new(CellKind::Vrnn, 30)).unwrap();
        assert!(p.embedding.as_slice().iter().all(|x| x.abs() <= INIT_RANGE));
        assert!(p.bias.iter().chain(&p.out_bias).all(|&b| b == 0.0));
    }

    #[test]
    fn untied_dimensions_are_rejected() {
        let cfg = ModelConfig { hidden_dim: 40, ..ModelConfig::new(CellKind::Lstm, 5) };
        assert!(matches!(init_params(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn output_projection_is_the_embedding() {
        let p = init_params(&ModelConfig::new(CellKind::Lstm, 5)).unwrap();
        assert!(std::ptr::eq(p.output_projection(), &p.embedding));
    }

    #[test]
    fn cell_names_parse() {
        for c in CellKind::ALL {
            assert_eq!(c.name().parse::<CellKind>().unwrap(), c);
        }
        assert!("transformer".parse::<CellKind>().is_err());
    }
}
