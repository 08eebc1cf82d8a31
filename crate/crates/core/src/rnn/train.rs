use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cells::CellState;
use super::model::{loss_and_grads, mean_cross_entropy};
use super::{init_params, ModelConfig, ModelParams};
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: f64,
    /// Training stops once the learning rate falls below this.
    pub min_learning_rate: f64,
    /// Relative validation log-likelihood gain below which the rate halves.
    pub min_relative_improvement: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 20,
            learning_rate: 20.0,
            clip_norm: 0.25,
            min_learning_rate: 0.1,
            min_relative_improvement: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_ppl: f64,
    pub valid_ppl: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// CSV without wall times, so equal runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,learning_rate,train_ppl,valid_ppl\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.learning_rate, e.train_ppl, e.valid_ppl));
        }
        s
    }

    pub fn final_valid_ppl(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.valid_ppl)
    }
}

fn clip_global_norm(grads: &mut ModelParams, threshold: f64) {
    let norm = grads.l2_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
}

/// Truncated-BPTT chunks: `bptt` inputs plus one trailing target, stride `bptt`.
fn chunks(stream: &[usize], bptt: usize) -> impl Iterator<Item = &[usize]> {
    (0..stream.len().saturating_sub(1)).step_by(bptt).map(move |s| &stream[s..(s + bptt + 1).min(stream.len())])
}

/// Stateful single-stream SGD with halving on stalled validation likelihood.
pub fn train(
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    train_stream: &[usize],
    valid_stream: &[usize],
) -> Result<(ModelParams, TrainLog)> {
    if train_stream.len() < 2 || valid_stream.len() < 2 {
        return Err(Error::Config("train and validation streams need at least two tokens".into()));
    }
    let mut params = init_params(config)?;
    let mut log = TrainLog::default();
    let mut lr = train_cfg.learning_rate;
    let mut best_valid = f64::INFINITY;

    for epoch in 1..=train_cfg.max_epochs {
        let started = Instant::now();
        let mut state = CellState::zeros(config.cell, config.hidden_dim);
        let mut loss_sum = 0.0;
        let mut predictions = 0usize;
        for (segment, chunk) in chunks(train_stream, config.bptt).enumerate() {
            let seq = TokenSequence::new(chunk.to_vec());
            let mut out = match loss_and_grads(&params, &seq, &state) {
                Ok(out) => out,
                Err(Error::NumericOverflow(_)) => {
                    return Err(Error::Divergence { epoch, segment, loss: f64::NAN });
                }
                Err(e) => return Err(e),
            };
            if !out.loss.is_finite() {
                return Err(Error::Divergence { epoch, segment, loss: out.loss });
            }
            loss_sum += out.loss * out.predictions as f64;
            predictions += out.predictions;
            clip_global_norm(&mut out.grads, train_cfg.clip_norm);
            params.add_scaled(-lr, &out.grads);
            if !params.is_finite() {
                return Err(Error::Divergence { epoch, segment, loss: out.loss });
            }
            state = out.final_state;
        }
        let valid_ce = mean_cross_entropy(&params, valid_stream).map_err(|_| Error::Divergence {
            epoch,
            segment: 0,
            loss: f64::NAN,
        })?;
        log.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_ppl: (loss_sum / predictions as f64).exp(),
            valid_ppl: valid_ce.exp(),
            wall_seconds: started.elapsed().as_secs_f64(),
        });

        if best_valid.is_finite() {
            let gain = (best_valid - valid_ce) / best_valid;
            if gain < train_cfg.min_relative_improvement {
                lr *= 0.5;
            }
        }
        best_valid = best_valid.min(valid_ce);
        if lr < train_cfg.min_learning_rate {
            break;
        }
    }
    Ok((params, log))
}
