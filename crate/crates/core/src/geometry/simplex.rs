//! Dense phase-one simplex for convex-hull membership.
//!
//! Decides whether `q` lies in the convex hull of `x_1..x_k` by minimising the
//! L1 residual of `sum_i a_i x_i = q` over the probability simplex. Writing
//! `a_1 = 1 - sum_{i>1} b_i` turns the affine constraint into an inequality with
//! a slack, so the all-slack basis is feasible from the start.

const PIVOT_TOL: f64 = 1e-12;

/// Result of the membership solve.
#[derive(Debug, Clone)]
pub struct HullFit {
    /// Convex weights, one per input point.
    pub weights: Vec<f64>,
    /// Euclidean norm of `q - sum_i w_i x_i`.
    pub residual: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last column is the right-hand side
    a: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..width {
            self.a[pr * width + c] *= inv;
        }
        let pivot_row: Vec<f64> = self.a[pr * width..(pr + 1) * width].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * width + pc];
            if f != 0.0 {
                let row = &mut self.a[r * width..(r + 1) * width];
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.reduced[pc];
        if f != 0.0 {
            for (x, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            self.reduced[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule; returns false if the iteration cap was hit.
    fn solve(&mut self, max_iter: usize) -> bool {
        for _ in 0..max_iter {
            // objective value is -reduced[cols]
            if -self.reduced[self.cols] <= PIVOT_TOL {
                return true;
            }
            let Some(pc) = (0..self.cols).find(|&c| self.reduced[c] < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, pc);
                if coef > PIVOT_TOL {
                    let ratio = self.rhs(r) / coef;
                    match best {
                        None => best = Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - PIVOT_TOL || (ratio <= bv + PIVOT_TOL && self.basis[r] < self.basis[br]) {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                // unbounded cannot happen: the objective is bounded below by zero
                None => return true,
            }
        }
        false
    }
}

/// Fits convex weights minimising the L1 residual to `q`.
///
/// All slices must share one dimension; callers validate this.
pub fn fit_convex_weights(points: &[&[f64]], q: &[f64]) -> HullFit {
    let k = points.len();
    let n = q.len();
    let residual_of = |w: &[f64]| -> f64 {
        (0..n)
            .map(|j| {
                let r = q[j] - points.iter().zip(w).map(|(p, wi)| wi * p[j]).sum::<f64>();
                r * r
            })
            .sum::<f64>()
            .sqrt()
    };
    if k == 1 {
        let weights = vec![1.0];
        let residual = residual_of(&weights);
        return HullFit { weights, residual };
    }

    let m = k - 1;
    // columns: b (m) | s+ (n) | s- (n) | t
    let cols = m + 2 * n + 1;
    let rows = n + 1;
    let width = cols + 1;
    let mut a = vec![0.0; rows * width];
    let mut basis = vec![0; rows];
    let base = points[0];
    for j in 0..n {
        let rhs = q[j] - base[j];
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        let row = &mut a[j * width..(j + 1) * width];
        for i in 0..m {
            row[i] = sign * (points[i + 1][j] - base[j]);
        }
        row[m + j] = sign;
        row[m + n + j] = -sign;
        row[cols] = sign * rhs;
        basis[j] = if sign > 0.0 { m + j } else { m + n + j };
    }
    {
        let row = &mut a[n * width..(n + 1) * width];
        for x in row.iter_mut().take(m) {
            *x = 1.0;
        }
        row[cols - 1] = 1.0;
        row[cols] = 1.0;
        basis[n] = cols - 1;
    }

    // reduced costs for c = 1 on every residual slack
    let mut reduced = vec![0.0; width];
    for c in m..m + 2 * n {
        reduced[c] = 1.0;
    }
    for j in 0..n {
        let row = &a[j * width..(j + 1) * width];
        for c in 0..width {
            reduced[c] -= row[c];
        }
    }

    let mut tab = Tableau { rows, cols, a, reduced, basis };
    tab.solve(50 * (rows + cols));

    let mut beta = vec![0.0; m];
    for r in 0..rows {
        let var = tab.basis[r];
        if var < m {
            beta[var] = tab.rhs(r).max(0.0);
        }
    }
    let total: f64 = beta.iter().sum();
    if total > 1.0 {
        for b in beta.iter_mut() {
            *b /= total;
        }
    }
    let mut weights = Vec::with_capacity(k);
    weights.push((1.0 - beta.iter().sum::<f64>()).max(0.0));
    weights.extend(beta);
    let residual = residual_of(&weights);
    HullFit { weights, residual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_query_has_zero_residual() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let fit = fit_convex_weights(&refs, &[1.0, 0.0]);
        assert!(fit.residual < 1e-12);
        assert!((fit.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_query_reports_distance() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let fit = fit_convex_weights(&refs, &[2.0, 2.0]);
        assert!(fit.residual > 1.0);
        assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fit.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn interior_weights_reconstruct_query() {
        let pts: Vec<Vec<f64>> =
            vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 2.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let fit = fit_convex_weights(&refs, &[0.5, -0.0, 0.25]);
        assert!(fit.residual < 1e-12, "{}", fit.residual);
    }
}
