//! Joint linear classifier over (spontaneity, emotion) tuples.
//!
//! One weight row per tuple; the objective is
//! `1/2 sum_r |w_r|^2 + C sum_j slack_j` with the multiclass hinge slack
//! `slack_j = max(0, max_{r != r_j} 1 + <w_r, f_j> - <w_{r_j}, f_j>)`.
//! Training runs stochastic subgradient descent with step `1 / (lambda t)`,
//! `lambda = 1 / (C N)`, which minimizes the same objective scaled by
//! `1 / (C N)`. Both the last iterate and the running mean of iterates are
//! scored after every epoch; the best one seen is returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_rows, TrainConfig};
use crate::error::{Error, Result};

/// |Y^s| * |Y^e|.
pub const N_TUPLES: usize = 8;
const N_EMOTIONS: usize = 4;

/// Epochs without a relative best-loss improvement of `tolerance` before
/// training stops.
const PATIENCE: usize = 10;

/// Row index of a (spontaneity, emotion) tuple.
pub fn tuple_row(spontaneity: usize, emotion: usize) -> usize {
    N_EMOTIONS * spontaneity + emotion
}

/// Inverse of [`tuple_row`].
pub fn row_tuple(row: usize) -> (usize, usize) {
    (row / N_EMOTIONS, row % N_EMOTIONS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointModel {
    /// `N_TUPLES` rows of length `dim`.
    pub weights: Vec<Vec<f64>>,
    pub c: f64,
    /// Objective value of the returned weights (0 when built by hand).
    pub final_loss: f64,
    pub epochs: usize,
    /// Objective after every epoch, for the better of the current and the
    /// averaged iterate.
    pub loss_history: Vec<f64>,
}

impl JointModel {
    pub fn from_weights(weights: Vec<Vec<f64>>, c: f64) -> Result<Self> {
        if weights.len() != N_TUPLES {
            return Err(Error::DimensionMismatch {
                expected: N_TUPLES,
                found: weights.len(),
            });
        }
        check_rows(&weights)?;
        Ok(Self {
            weights,
            c,
            final_loss: 0.0,
            epochs: 0,
            loss_history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.weights.iter().map(|w| dot(w, x)).collect())
    }

    /// Highest-scoring row, lowest index on ties.
    pub fn predict_row(&self, x: &[f64]) -> Result<usize> {
        let s = self.scores(x)?;
        Ok(argmax(&s))
    }

    /// (spontaneity, emotion) of the highest-scoring row.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, usize)> {
        self.predict_row(x).map(row_tuple)
    }
}

pub fn predict_joint(model: &JointModel, x: &[f64]) -> Result<(usize, usize)> {
    model.predict(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Best competing row and the hinge slack of one sample.
fn slack(weights: &[Vec<f64>], x: &[f64], row: usize) -> (usize, f64) {
    let scores: Vec<f64> = weights.iter().map(|w| dot(w, x)).collect();
    let mut rival = if row == 0 { 1 } else { 0 };
    for (r, &s) in scores.iter().enumerate() {
        if r != row && s > scores[rival] {
            rival = r;
        }
    }
    (rival, (1.0 + scores[rival] - scores[row]).max(0.0))
}

fn check_tuples(tuples: &[(usize, usize)]) -> Result<Vec<usize>> {
    tuples
        .iter()
        .map(|&(s, e)| {
            if s < 2 && e < N_EMOTIONS {
                Ok(tuple_row(s, e))
            } else {
                Err(Error::BadConfig(format!("label tuple ({s}, {e}) out of range")))
            }
        })
        .collect()
}

/// Joint objective of `weights` on the given samples.
pub fn joint_loss(
    weights: &[Vec<f64>],
    x: &[Vec<f64>],
    tuples: &[(usize, usize)],
    c: f64,
) -> Result<f64> {
    if x.len() != tuples.len() {
        return Err(Error::LengthMismatch {
            left: tuples.len(),
            right: x.len(),
        });
    }
    if weights.len() != N_TUPLES {
        return Err(Error::DimensionMismatch {
            expected: N_TUPLES,
            found: weights.len(),
        });
    }
    let dim = weights[0].len();
    for row in weights.iter().chain(x) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
    }
    let rows = check_tuples(tuples)?;
    Ok(loss_unchecked(weights, x, &rows, c))
}

fn loss_unchecked(weights: &[Vec<f64>], x: &[Vec<f64>], rows: &[usize], c: f64) -> f64 {
    let reg: f64 = weights.iter().map(|w| dot(w, w)).sum::<f64>() * 0.5;
    let slacks: f64 = x.iter().zip(rows).map(|(xi, &r)| slack(weights, xi, r).1).sum();
    reg + c * slacks
}

/// Minimize the joint objective. Returns the best iterate seen.
pub fn train_joint(x: &[Vec<f64>], tuples: &[(usize, usize)], cfg: &TrainConfig) -> Result<JointModel> {
    cfg.validate()?;
    if x.len() != tuples.len() {
        return Err(Error::LengthMismatch {
            left: tuples.len(),
            right: x.len(),
        });
    }
    let rows = check_tuples(tuples)?;
    let mut distinct = rows.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = check_rows(x)?;

    let n = x.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = vec![vec![0.0; dim]; N_TUPLES];
    let mut avg = w.clone();
    let mut best_w = w.clone();
    let zero_loss = loss_unchecked(&w, x, &rows, cfg.c);
    let mut best_loss = zero_loss;
    let mut history = Vec::new();
    let mut stale = 0;
    let mut t: u64 = 0;
    let mut epochs = 0;

    while epochs < cfg.max_passes {
        order.shuffle(&mut rng);
        for &j in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (rival, hinge) = slack(&w, &x[j], rows[j]);
            let shrink = 1.0 - eta * lambda;
            for row in w.iter_mut() {
                row.iter_mut().for_each(|v| *v *= shrink);
            }
            if hinge > 0.0 {
                for (v, f) in w[rows[j]].iter_mut().zip(&x[j]) {
                    *v += eta * f;
                }
                for (v, f) in w[rival].iter_mut().zip(&x[j]) {
                    *v -= eta * f;
                }
            }
            let norm = w.iter().map(|r| dot(r, r)).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                for row in w.iter_mut() {
                    row.iter_mut().for_each(|v| *v *= s);
                }
            }
            // running mean of all iterates
            let step = 1.0 / t as f64;
            for (a, r) in avg.iter_mut().zip(&w) {
                for (av, v) in a.iter_mut().zip(r) {
                    *av += step * (v - *av);
                }
            }
        }
        epochs += 1;

        let current = loss_unchecked(&w, x, &rows, cfg.c);
        let averaged = loss_unchecked(&avg, x, &rows, cfg.c);
        let (loss, cand) = if averaged < current { (averaged, &avg) } else { (current, &w) };
        history.push(loss);
        if loss < best_loss {
            let improvement = (best_loss - loss) / best_loss.max(f64::MIN_POSITIVE);
            let first = best_loss == zero_loss;
            best_loss = loss;
            best_w.clone_from(cand);
            if improvement < cfg.tolerance && !first {
                stale += 1;
            } else {
                stale = 0;
            }
        } else if best_loss < zero_loss {
            stale += 1;
        }
        if stale >= PATIENCE || best_loss == 0.0 {
            break;
        }
    }

    Ok(JointModel {
        weights: best_w,
        c: cfg.c,
        final_loss: best_loss,
        epochs,
        loss_history: history,
    })
}
