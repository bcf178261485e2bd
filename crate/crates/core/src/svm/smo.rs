//! Binary soft-margin SVM trained by pairwise coordinate ascent on the dual.
//!
//! The dual is
//!
//! ```text
//! max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Each step picks the maximally violating pair with second-order
//! information (the WSS2 rule of Fan, Chen and Lin) and solves the
//! two-variable subproblem analytically. Iteration stops once the gap
//! between the largest and smallest violation falls below the tolerance,
//! which puts every training point within the tolerance of its KKT
//! condition.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_rows, KernelSpec, TrainConfig};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
/// Kernel cache budget, in f64 entries.
const CACHE_ENTRIES: usize = 1 << 25;

#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvm {
    pub kernel: KernelSpec,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map(Vec::len).unwrap_or(0)
    }

    /// Decision value `sum_i coef_i K(sv_i, x) + bias`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    /// Label in {-1, +1}; a zero margin counts as +1.
    pub fn predict(&self, x: &[f64]) -> Result<(i8, f64)> {
        let m = self.margin(x)?;
        Ok((if m >= 0.0 { 1 } else { -1 }, m))
    }
}

pub fn predict_binary(model: &BinarySvm, x: &[f64]) -> Result<(i8, f64)> {
    model.predict(x)
}

/// Full solver output, including the multiplier of every training point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub model: BinarySvm,
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    kernel: KernelSpec,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        let n = x.len();
        Self {
            x,
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (CACHE_ENTRIES / n.max(1)).max(2),
        }
    }

    /// Make row `i` resident without evicting row `keep`.
    fn ensure(&mut self, i: usize, keep: Option<usize>) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            let pos = self.order.iter().position(|&r| Some(r) != keep).unwrap_or(0);
            if let Some(old) = self.order.remove(pos) {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let row = self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row cached by ensure")
    }
}

fn labels_to_signs(y: &[i8]) -> Result<Vec<f64>> {
    let signs: Vec<f64> = y
        .iter()
        .map(|&v| match v {
            1 => Ok(1.0),
            -1 => Ok(-1.0),
            other => Err(Error::BadConfig(format!("binary labels must be -1 or +1, got {other}"))),
        })
        .collect::<Result<_>>()?;
    let pos = signs.iter().any(|&s| s > 0.0);
    let neg = signs.iter().any(|&s| s < 0.0);
    if !(pos && neg) {
        return Err(Error::SingleClass);
    }
    Ok(signs)
}

/// Train a binary SVM on labels in {-1, +1}.
pub fn train_binary(x: &[Vec<f64>], y: &[i8], cfg: &TrainConfig) -> Result<BinarySvm> {
    solve_dual(x, y, cfg).map(|s| s.model)
}

/// Solve the dual problem and return every multiplier alongside the model.
pub fn solve_dual(x: &[Vec<f64>], y: &[i8], cfg: &TrainConfig) -> Result<DualSolution> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    let sign = labels_to_signs(y)?;
    let dim = check_rows(x)?;
    let kernel = cfg.kernel_for(dim);
    kernel.validate()?;

    let n = x.len();
    let c = cfg.c;
    let eps = cfg.tolerance;
    let diag: Vec<f64> = x.iter().map(|xi| kernel.eval(xi, xi)).collect();
    let mut cache = KernelRows::new(x, kernel);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.max_passes.saturating_mul(n).max(n);

    let in_up = |a: f64, s: f64| (s > 0.0 && a < c) || (s < 0.0 && a > 0.0);
    let in_low = |a: f64, s: f64| (s < 0.0 && a < c) || (s > 0.0 && a > 0.0);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for &t in &order {
            if in_up(alpha[t], sign[t]) {
                let v = -sign[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        cache.ensure(i, None);
        let mut g_min = f64::INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = None;
        {
            let ki = cache.row(i);
            for &t in &order {
                if !in_low(alpha[t], sign[t]) {
                    continue;
                }
                let v = -sign[t] * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if g_max - g_min < eps {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        cache.ensure(j, Some(i));
        iterations += 1;

        let k_ij = cache.row(i)[j];
        let mut quad = diag[i] + diag[j] - 2.0 * k_ij;
        if quad <= 0.0 {
            quad = TAU;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if sign[i] != sign[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        let (di, dj) = (ai - old_i, aj - old_j);
        let (ki, kj) = (cache.row(i), cache.row(j));
        for t in 0..n {
            grad[t] += sign[t] * (sign[i] * ki[t] * di + sign[j] * kj[t] * dj);
        }
    }

    let bias = -rho(&alpha, &grad, &sign, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coef.push(alpha[t] * sign[t]);
        }
    }
    Ok(DualSolution {
        model: BinarySvm {
            kernel,
            support_vectors,
            dual_coef,
            bias,
        },
        alpha,
        objective,
        iterations,
        converged,
    })
}

/// Offset such that free multipliers sit exactly on the margin; without
/// free multipliers, the midpoint of the feasible interval.
fn rho(alpha: &[f64], grad: &[f64], sign: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = sign[t] * grad[t];
        if alpha[t] >= c {
            if sign[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}
