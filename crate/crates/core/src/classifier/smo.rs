//! Sequential minimal optimization for the soft-margin dual
//!
//! ```text
//! min_α  ½ αᵀQα − Σα    s.t.  yᵀα = 0,  0 ≤ α_i ≤ C_i,   Q_ij = y_i y_j K_ij
//! ```
//!
//! using the maximal violating pair as working set.

use rayon::prelude::*;

use super::kernel::Kernel;

const TAU: f64 = 1e-12;

/// Dense symmetric kernel matrix over a row set.
pub(crate) struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    pub(crate) fn compute<T: AsRef<[f64]> + Sync>(kernel: &Kernel, rows: &[T]) -> Self {
        let n = rows.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| kernel.eval_unchecked(rows[i].as_ref(), rows[j].as_ref()))
                    .collect()
            })
            .collect();
        let mut values = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (o, &v) in row.iter().enumerate() {
                values[i * n + i + o] = v;
                values[(i + o) * n + i] = v;
            }
        }
        Gram { n, values }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[cfg(test)]
    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal-violating-pair gap.
    pub violation: f64,
    pub converged: bool,
    /// Dual objective `Σα − ½αᵀQα` after each iteration, when recorded.
    pub objective: Vec<f64>,
}

pub(crate) struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub record_objective: bool,
}

/// Solves the dual over the samples `idx` of `gram`. `y` holds ±1 and
/// `cap` the per-sample upper bounds, both indexed like `idx`.
pub(crate) fn solve(
    gram: &Gram,
    idx: &[usize],
    y: &[f64],
    cap: &[f64],
    settings: &SolverSettings,
) -> Solution {
    let n = idx.len();
    let k = |a: usize, b: usize| gram.get(idx[a], idx[b]);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    let in_up = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] < cap[t] } else { a[t] > 0.0 };
    let in_low = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] > 0.0 } else { a[t] < cap[t] };

    let (violation, converged) = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX {
            break (0.0, true);
        }
        let gap = gmax - gmin;
        if gap <= settings.tolerance {
            break (gap.max(0.0), true);
        }
        if iterations >= settings.max_iterations {
            break (gap, false);
        }

        let (ci, cj) = (cap[i], cap[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k(i, j);
        let (qii, qjj) = (k(i, i), k(j, j));
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
        iterations += 1;
        if settings.record_objective {
            let f: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() * 0.5;
            objective.push(-f);
        }
    };

    let rho = compute_rho(&alpha, &grad, y, cap);
    Solution {
        alpha,
        rho,
        iterations,
        violation,
        converged,
        objective,
    }
}

/// Offset ρ of `f(x) = Σ α_i y_i K(x_i, x) − ρ`: the mean of `y_t ∇_t` over
/// free variables, or the midpoint of the feasible interval when none are free.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], cap: &[f64]) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum = 0.0;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= cap[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
