use serde::{Deserialize, Serialize};

use super::cells::{step_backward, step_forward, CellState, StepCache};
use super::tensor::{axpy, dot};
use super::ModelParams;
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

/// Input embeddings and hidden states of one processed sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenTrace {
    pub tokens: Vec<usize>,
    pub inputs: Vec<Vec<f64>>,
    pub hiddens: Vec<Vec<f64>>,
}

impl HiddenTrace {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

fn check_ids(params: &ModelParams, ids: &[usize]) -> Result<()> {
    let v = params.vocab_size();
    match ids.iter().find(|&&i| i >= v) {
        Some(&bad) => Err(Error::Config(format!("token id {bad} out of range for vocabulary of {v}"))),
        None => Ok(()),
    }
}

/// Runs the cell over every token of `sequence`.
pub fn forward_trace(
    params: &ModelParams,
    sequence: &TokenSequence,
    initial_state: &CellState,
) -> Result<(HiddenTrace, CellState)> {
    check_ids(params, &sequence.ids)?;
    let mut state = initial_state.clone();
    let mut inputs = Vec::with_capacity(sequence.len());
    let mut hiddens = Vec::with_capacity(sequence.len());
    for &id in &sequence.ids {
        let x = params.embedding.row(id);
        let (h, next) = super::cell_step(params, x, &state)?;
        inputs.push(x.to_vec());
        hiddens.push(h);
        state = next;
    }
    Ok((HiddenTrace { tokens: sequence.ids.clone(), inputs, hiddens }, state))
}

/// Writes log-softmax of `E h + b` into `out` and returns nothing; `out` has length V.
fn log_softmax_logits(params: &ModelParams, h: &[f64], out: &mut [f64]) {
    let e = &params.embedding;
    let mut max = f64::NEG_INFINITY;
    for (v, o) in out.iter_mut().enumerate() {
        *o = dot(e.row(v), h) + params.out_bias[v];
        max = max.max(*o);
    }
    let sum: f64 = out.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    out.iter_mut().for_each(|l| *l -= log_z);
}

pub struct LossAndGrads {
    /// Mean next-token cross-entropy (nats).
    pub loss: f64,
    pub grads: ModelParams,
    pub final_state: CellState,
    pub predictions: usize,
}

/// Mean next-token cross-entropy over `sequence` and its gradient by
/// backpropagation through the whole segment.
///
/// Inputs are tokens `0 .. L-1` and targets tokens `1 .. L`; the returned state
/// follows the last input.
pub fn loss_and_grads(
    params: &ModelParams,
    sequence: &TokenSequence,
    initial_state: &CellState,
) -> Result<LossAndGrads> {
    let ids = &sequence.ids;
    if ids.len() < 2 {
        return Err(Error::Config("loss needs a sequence of at least two tokens".into()));
    }
    check_ids(params, ids)?;
    let n = params.dim();
    let vocab = params.vocab_size();
    let steps = ids.len() - 1;
    let scale = 1.0 / steps as f64;

    let mut state = initial_state.clone();
    let mut caches: Vec<StepCache> = Vec::with_capacity(steps);
    let mut grads = params.zeros_like();
    let mut dh_out: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut logp = vec![0.0; vocab];
    let mut loss = 0.0;

    for t in 0..steps {
        let (cache, next) = step_forward(params, params.embedding.row(ids[t]), &state);
        state = next;
        log_softmax_logits(params, &cache.h, &mut logp);
        let target = ids[t + 1];
        loss -= logp[target];

        // dlogits = (softmax - onehot) / steps, fused with the projection backward
        let mut dh = vec![0.0; n];
        for v in 0..vocab {
            let mut g = logp[v].exp();
            if v == target {
                g -= 1.0;
            }
            g *= scale;
            grads.out_bias[v] += g;
            axpy(g, params.embedding.row(v), &mut dh);
            axpy(g, &cache.h, grads.embedding.row_mut(v));
        }
        dh_out.push(dh);
        caches.push(cache);
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(Error::NumericOverflow("loss"));
    }

    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; if params.cell == super::CellKind::Lstm { n } else { 0 }];
    for t in (0..steps).rev() {
        let mut dh = dh_out[t].clone();
        axpy(1.0, &dh_next, &mut dh);
        let (dx, dh_prev, dc_prev) = step_backward(params, &caches[t], &dh, &dc_next, &mut grads);
        axpy(1.0, &dx, grads.embedding.row_mut(ids[t]));
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    Ok(LossAndGrads { loss, grads, final_state: state, predictions: steps })
}

/// Mean next-token cross-entropy over a stream with carried state.
pub fn mean_cross_entropy(params: &ModelParams, stream: &[usize]) -> Result<f64> {
    if stream.len() < 2 {
        return Err(Error::Config("perplexity needs at least two tokens".into()));
    }
    check_ids(params, stream)?;
    let mut state = CellState::zeros(params.cell, params.dim());
    let mut logp = vec![0.0; params.vocab_size()];
    let mut total = 0.0;
    for t in 0..stream.len() - 1 {
        let (cache, next) = step_forward(params, params.embedding.row(stream[t]), &state);
        state = next;
        log_softmax_logits(params, &cache.h, &mut logp);
        total -= logp[stream[t + 1]];
    }
    let mean = total / (stream.len() - 1) as f64;
    if mean.is_finite() {
        Ok(mean)
    } else {
        Err(Error::NumericOverflow("cross-entropy"))
    }
}

/// `exp` of the mean next-token cross-entropy.
pub fn perplexity(params: &ModelParams, stream: &[usize]) -> Result<f64> {
    mean_cross_entropy(params, stream).map(f64::exp)
}
