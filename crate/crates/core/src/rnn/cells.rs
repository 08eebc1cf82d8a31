//! One recurrence step per cell type, with the cached activations the
//! backward pass needs.

use super::tensor::sigmoid;
use super::{CellKind, ModelParams};
use crate::error::{Error, Result};

/// Recurrent state. `c` is the LSTM memory cell and is empty for other cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(cell: CellKind, dim: usize) -> Self {
        let c = if cell == CellKind::Lstm { vec![0.0; dim] } else { Vec::new() };
        Self { h: vec![0.0; dim], c }
    }

    fn check(&self, cell: CellKind, dim: usize) -> Result<()> {
        let want_c = if cell == CellKind::Lstm { dim } else { 0 };
        if self.h.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.h.len() });
        }
        if self.c.len() != want_c {
            return Err(Error::DimensionMismatch { expected: want_c, found: self.c.len() });
        }
        Ok(())
    }
}

/// Activations cached by one forward step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gate values, block layout as in [`ModelParams`].
    pub gates: Vec<f64>,
    /// LSTM: `tanh(c_new)`. GRU: `r * h_prev`.
    pub aux: Vec<f64>,
    pub h: Vec<f64>,
}

/// Applies one recurrence step.
pub fn cell_step(params: &ModelParams, x: &[f64], state: &CellState) -> Result<(Vec<f64>, CellState)> {
    let n = params.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    state.check(params.cell, n)?;
    if x.iter().chain(&state.h).chain(&state.c).any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("cell step input"));
    }
    let (cache, next) = step_forward(params, x, state);
    Ok((cache.h, next))
}

pub(crate) fn step_forward(params: &ModelParams, x: &[f64], state: &CellState) -> (StepCache, CellState) {
    let n = params.dim();
    let g = params.cell.gate_blocks();
    let mut pre = params.bias.clone();
    params.w_x.matvec_rows_add(0, x, &mut pre);
    match params.cell {
        CellKind::Vrnn => {
            params.w_h.matvec_rows_add(0, &state.h, &mut pre);
            let h: Vec<f64> = pre.iter().map(|a| a.tanh()).collect();
            let cache = StepCache {
                x: x.to_vec(),
                h_prev: state.h.clone(),
                c_prev: Vec::new(),
                gates: h.clone(),
                aux: Vec::new(),
                h: h.clone(),
            };
            (cache, CellState { h, c: Vec::new() })
        }
        CellKind::Lstm => {
            params.w_h.matvec_rows_add(0, &state.h, &mut pre);
            let mut gates = vec![0.0; g * n];
            for k in 0..3 * n {
                gates[k] = sigmoid(pre[k]);
            }
            for k in 3 * n..4 * n {
                gates[k] = pre[k].tanh();
            }
            let (i, f, o, cand) = (&gates[..n], &gates[n..2 * n], &gates[2 * n..3 * n], &gates[3 * n..]);
            let c: Vec<f64> = (0..n).map(|k| f[k] * state.c[k] + i[k] * cand[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h: Vec<f64> = (0..n).map(|k| o[k] * tanh_c[k]).collect();
            let cache = StepCache {
                x: x.to_vec(),
                h_prev: state.h.clone(),
                c_prev: state.c.clone(),
                gates,
                aux: tanh_c,
                h: h.clone(),
            };
            (cache, CellState { h, c })
        }
        CellKind::Gru => {
            // update and reset blocks see h directly; the candidate sees r * h
            params.w_h.matvec_rows_add(0, &state.h, &mut pre[..2 * n]);
            let mut gates = vec![0.0; g * n];
            for k in 0..2 * n {
                gates[k] = sigmoid(pre[k]);
            }
            let rh: Vec<f64> = (0..n).map(|k| gates[n + k] * state.h[k]).collect();
            params.w_h.matvec_rows_add(2 * n, &rh, &mut pre[2 * n..]);
            for k in 2 * n..3 * n {
                gates[k] = pre[k].tanh();
            }
            let (z, cand) = (&gates[..n], &gates[2 * n..]);
            let h: Vec<f64> = (0..n).map(|k| z[k] * state.h[k] + (1.0 - z[k]) * cand[k]).collect();
            let cache =
                StepCache { x: x.to_vec(), h_prev: state.h.clone(), c_prev: Vec::new(), gates, aux: rh, h: h.clone() };
            (cache, CellState { h, c: Vec::new() })
        }
    }
}

/// Backward through one step.
///
/// `dh` and `dc` are gradients with respect to this step's outputs; `dc` is
/// ignored for non-LSTM cells. Parameter gradients accumulate into `grads`.
/// Returns `(dx, dh_prev, dc_prev)`.
pub(crate) fn step_backward(
    params: &ModelParams,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut ModelParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = params.dim();
    match params.cell {
        CellKind::Vrnn => {
            let da: Vec<f64> = (0..n).map(|k| dh[k] * (1.0 - cache.h[k] * cache.h[k])).collect();
            accumulate_block(grads, 0, &da, &cache.x, &cache.h_prev);
            let mut dx = vec![0.0; n];
            params.w_x.matvec_t_rows_add(0, &da, &mut dx);
            let mut dh_prev = vec![0.0; n];
            params.w_h.matvec_t_rows_add(0, &da, &mut dh_prev);
            (dx, dh_prev, Vec::new())
        }
        CellKind::Lstm => {
            let gates = &cache.gates;
            let (i, f, o, cand) = (&gates[..n], &gates[n..2 * n], &gates[2 * n..3 * n], &gates[3 * n..]);
            let tanh_c = &cache.aux;
            let mut dz = vec![0.0; 4 * n];
            let mut dc_prev = vec![0.0; n];
            for k in 0..n {
                let dck = dc[k] + dh[k] * o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
                let d_o = dh[k] * tanh_c[k];
                let d_i = dck * cand[k];
                let d_g = dck * i[k];
                let d_f = dck * cache.c_prev[k];
                dc_prev[k] = dck * f[k];
                dz[k] = d_i * i[k] * (1.0 - i[k]);
                dz[n + k] = d_f * f[k] * (1.0 - f[k]);
                dz[2 * n + k] = d_o * o[k] * (1.0 - o[k]);
                dz[3 * n + k] = d_g * (1.0 - cand[k] * cand[k]);
            }
            accumulate_block(grads, 0, &dz, &cache.x, &cache.h_prev);
            let mut dx = vec![0.0; n];
            params.w_x.matvec_t_rows_add(0, &dz, &mut dx);
            let mut dh_prev = vec![0.0; n];
            params.w_h.matvec_t_rows_add(0, &dz, &mut dh_prev);
            (dx, dh_prev, dc_prev)
        }
        CellKind::Gru => {
            let gates = &cache.gates;
            let (z, r, cand) = (&gates[..n], &gates[n..2 * n], &gates[2 * n..]);
            let h_prev = &cache.h_prev;
            let mut dh_prev: Vec<f64> = (0..n).map(|k| dh[k] * z[k]).collect();
            let mut dpre = vec![0.0; 3 * n];
            for k in 0..n {
                let dcand = dh[k] * (1.0 - z[k]);
                dpre[2 * n + k] = dcand * (1.0 - cand[k] * cand[k]);
                let dzk = dh[k] * (h_prev[k] - cand[k]);
                dpre[k] = dzk * z[k] * (1.0 - z[k]);
            }
            let da_c = &dpre[2 * n..].to_vec();
            // candidate block: recurrent input is r * h_prev
            let mut d_rh = vec![0.0; n];
            params.w_h.matvec_t_rows_add(2 * n, da_c, &mut d_rh);
            for k in 0..n {
                let dr = d_rh[k] * h_prev[k];
                dh_prev[k] += d_rh[k] * r[k];
                dpre[n + k] = dr * r[k] * (1.0 - r[k]);
            }
            grads.w_x.add_outer_rows(0, &dpre, &cache.x);
            grads.w_h.add_outer_rows(0, &dpre[..2 * n], h_prev);
            grads.w_h.add_outer_rows(2 * n, da_c, &cache.aux);
            for (b, d) in grads.bias.iter_mut().zip(&dpre) {
                *b += d;
            }
            params.w_h.matvec_t_rows_add(0, &dpre[..2 * n], &mut dh_prev);
            let mut dx = vec![0.0; n];
            params.w_x.matvec_t_rows_add(0, &dpre, &mut dx);
            (dx, dh_prev, Vec::new())
        }
    }
}

fn accumulate_block(grads: &mut ModelParams, row_start: usize, dpre: &[f64], x: &[f64], h_prev: &[f64]) {
    grads.w_x.add_outer_rows(row_start, dpre, x);
    grads.w_h.add_outer_rows(row_start, dpre, h_prev);
    for (b, d) in grads.bias[row_start..].iter_mut().zip(dpre) {
        *b += d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{init_params, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(cell: CellKind, n: usize, seed: u64) -> ModelParams {
        let mut p =
            init_params(&ModelConfig { embed_dim: n, hidden_dim: n, seed, ..ModelConfig::new(cell, 4) }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for (_, t) in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        p
    }

    /// Independent textbook formulation of each cell, written gate by gate.
    fn reference_step(p: &ModelParams, x: &[f64], s: &CellState) -> (Vec<f64>, Vec<f64>) {
        let n = p.dim();
        let affine = |block: usize, inp: &[f64], rec: &[f64], k: usize| -> f64 {
            let r = block * n + k;
            let mut a = p.bias[r];
            for j in 0..n {
                a += p.w_x.row(r)[j] * inp[j] + p.w_h.row(r)[j] * rec[j];
            }
            a
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        match p.cell {
            CellKind::Vrnn => ((0..n).map(|k| affine(0, x, &s.h, k).tanh()).collect(), vec![]),
            CellKind::Lstm => {
                let mut h = vec![0.0; n];
                let mut c = vec![0.0; n];
                for k in 0..n {
                    let i = sig(affine(0, x, &s.h, k));
                    let f = sig(affine(1, x, &s.h, k));
                    let o = sig(affine(2, x, &s.h, k));
                    let g = affine(3, x, &s.h, k).tanh();
                    c[k] = f * s.c[k] + i * g;
                    h[k] = o * c[k].tanh();
                }
                (h, c)
            }
            CellKind::Gru => {
                let r: Vec<f64> = (0..n).map(|k| sig(affine(1, x, &s.h, k))).collect();
                let rh: Vec<f64> = (0..n).map(|k| r[k] * s.h[k]).collect();
                let h = (0..n)
                    .map(|k| {
                        let z = sig(affine(0, x, &s.h, k));
                        let cand = affine(2, x, &rh, k).tanh();
                        z * s.h[k] + (1.0 - z) * cand
                    })
                    .collect();
                (h, vec![])
            }
        }
    }

    #[test]
    fn zero_vrnn_gives_zero_state() {
        let p = ModelParams::zeros(CellKind::Vrnn, 3, 4);
        let (h, _) = cell_step(&p, &[0.3, -2.0, 5.0, 1.0], &CellState::zeros(CellKind::Vrnn, 4)).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn saturated_update_gate_keeps_state() {
        let mut p = small(CellKind::Gru, 5, 3);
        p.bias[..5].fill(40.0);
        let prev = CellState { h: vec![0.3, -0.2, 0.9, -0.7, 0.1], c: vec![] };
        let (h, _) = cell_step(&p, &[1.0, -1.0, 0.5, 0.2, 0.0], &prev).unwrap();
        for (a, b) in h.iter().zip(&prev.h) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn steps_match_reference_formulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for cell in CellKind::ALL {
            let p = small(cell, 6, 1);
            let mut s = CellState::zeros(cell, 6);
            s.h.iter_mut().for_each(|v| *v = rng.random_range(-0.9..0.9));
            s.c.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, next) = cell_step(&p, &x, &s).unwrap();
            let (h_ref, c_ref) = reference_step(&p, &x, &s);
            for (a, b) in h.iter().zip(&h_ref).chain(next.c.iter().zip(&c_ref)) {
                assert!((a - b).abs() < 1e-10, "{cell}: {a} vs {b}");
            }
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn step_backward_matches_finite_differences_of_the_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for cell in CellKind::ALL {
            let n = 4;
            let p = small(cell, n, 2);
            let mut s = CellState::zeros(cell, n);
            s.h.iter_mut().for_each(|v| *v = rng.random_range(-0.9..0.9));
            s.c.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wh: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wc: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // scalar objective: wh . h + wc . c
            let objective = |x: &[f64], s: &CellState| {
                let (cache, next) = step_forward(&p, x, s);
                let mut v: f64 = cache.h.iter().zip(&wh).map(|(a, b)| a * b).sum();
                v += next.c.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>();
                v
            };
            let (cache, _) = step_forward(&p, &x, &s);
            let mut grads = p.zeros_like();
            let dc = if cell == CellKind::Lstm { wc.clone() } else { vec![] };
            let (dx, dh_prev, dc_prev) = step_backward(&p, &cache, &wh, &dc, &mut grads);
            let step = 1e-5;
            for k in 0..n {
                let mut xp = x.clone();
                xp[k] += step;
                let mut xm = x.clone();
                xm[k] -= step;
                let fd = (objective(&xp, &s) - objective(&xm, &s)) / (2.0 * step);
                assert!((fd - dx[k]).abs() < 1e-8, "{cell} dx");
                let mut sp = s.clone();
                sp.h[k] += step;
                let mut sm = s.clone();
                sm.h[k] -= step;
                let fd = (objective(&x, &sp) - objective(&x, &sm)) / (2.0 * step);
                assert!((fd - dh_prev[k]).abs() < 1e-8, "{cell} dh_prev");
                if cell == CellKind::Lstm {
                    let mut sp = s.clone();
                    sp.c[k] += step;
                    let mut sm = s.clone();
                    sm.c[k] -= step;
                    let fd = (objective(&x, &sp) - objective(&x, &sm)) / (2.0 * step);
                    assert!((fd - dc_prev[k]).abs() < 1e-8, "{cell} dc_prev");
                }
            }
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = small(CellKind::Lstm, 3, 1);
        let s = CellState::zeros(CellKind::Lstm, 3);
        assert!(matches!(cell_step(&p, &[f64::NAN, 0.0, 0.0], &s), Err(Error::NumericOverflow(_))));
        assert!(matches!(cell_step(&p, &[0.0, 0.0], &s), Err(Error::DimensionMismatch { .. })));
    }
}
