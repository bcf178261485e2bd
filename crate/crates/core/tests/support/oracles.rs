//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::svm::{kernel_eval, KernelSpec, N_TUPLES};

pub fn tone(freq: f64, n: usize, rate: f64, amp: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
}

/// Straightforward MFCC: direct DFT, filterbank built from scratch.
pub fn reference_mfcc(frame: &[f64], rate: f64, n_filters: usize, n_keep: usize) -> Vec<f64> {
    let n = frame.len();
    let emphasized: Vec<f64> = (0..n)
        .map(|i| frame[i] - if i > 0 { 0.97 * frame[i - 1] } else { 0.0 })
        .collect();
    let windowed: Vec<f64> = emphasized
        .iter()
        .enumerate()
        .map(|(i, v)| v * (0.54 - 0.46 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos()))
        .collect();
    let spectrum: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in windowed.iter().enumerate() {
                let phase = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect();

    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(rate / 2.0);
    let points: Vec<f64> = (0..n_filters + 2)
        .map(|i| inv(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let log_energies: Vec<f64> = (0..n_filters)
        .map(|j| {
            let (a, b, c) = (points[j], points[j + 1], points[j + 2]);
            let mut e = 0.0;
            for (k, mag) in spectrum.iter().enumerate() {
                let f = k as f64 * rate / n as f64;
                let w = if f > a && f <= b {
                    (f - a) / (b - a)
                } else if f > b && f < c {
                    (c - f) / (c - b)
                } else {
                    0.0
                };
                e += w * mag;
            }
            e.max(1e-10).ln()
        })
        .collect();
    (1..=n_keep)
        .map(|q| {
            (2.0 / n_filters as f64).sqrt()
                * log_energies
                    .iter()
                    .enumerate()
                    .map(|(m, e)| e * (PI * q as f64 * (m as f64 + 0.5) / n_filters as f64).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub struct Stats {
    pub values: [f64; 12],
}

/// Textbook statistics, computed independently of the crate.
pub fn brute_force(track: &[f64]) -> Stats {
    let n = track.len() as f64;
    let mean = track.iter().sum::<f64>() / n;
    let moment = |p: i32| track.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let var = moment(2);
    let sd = var.sqrt();
    let (skew, kurt) = if var > 0.0 {
        (moment(3) / sd.powi(3), moment(4) / (var * var) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let mut sorted = track.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let first = |x: f64| track.iter().position(|&v| v == x).unwrap() as f64;
    let rel = |p: f64| if track.len() == 1 { 0.0 } else { p / (n - 1.0) };

    // least squares through the normal equations
    let st: f64 = (0..track.len()).map(|t| t as f64).sum();
    let stt: f64 = (0..track.len()).map(|t| (t * t) as f64).sum();
    let sy: f64 = track.iter().sum();
    let sty: f64 = track.iter().enumerate().map(|(t, v)| t as f64 * v).sum();
    let det = n * stt - st * st;
    let slope = if det > 0.0 && var > 0.0 { (n * sty - st * sy) / det } else { 0.0 };
    let offset = (sy - slope * st) / n;
    let mse = track
        .iter()
        .enumerate()
        .map(|(t, v)| (v - offset - slope * t as f64).powi(2))
        .sum::<f64>()
        / n;
    Stats {
        values: [
            mean,
            sd,
            kurt,
            skew,
            min,
            max,
            max - min,
            rel(first(min)),
            rel(first(max)),
            slope,
            offset,
            mse,
        ],
    }
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<i8> = x
            .iter()
            .map(|r| {
                let s = r[0] - 0.5 * r[1 % dim] + rng.random_range(-0.8..0.8);
                if s >= 0.0 { 1 } else { -1 }
            })
            .collect();
        if y.contains(&1) && y.contains(&-1) {
            return (x, y);
        }
    }
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * out[k]).sum();
        out[r] = (b[r] - s) / a[r][r];
    }
    Some(out)
}

/// Optimal dual value by enumerating every assignment of points to
/// {at zero, free, at C} and keeping the feasible stationary points.
pub fn enumerated_optimum(x: &[Vec<f64>], y: &[i8], kernel: KernelSpec, c: f64) -> f64 {
    let n = x.len();
    let s: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| s[i] * s[j] * kernel_eval(&x[i], &x[j], &kernel).unwrap()).collect())
        .collect();
    let dual = |a: &[f64]| {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut a: Vec<f64> = state.iter().map(|&st| if st == 2 { c } else { 0.0 }).collect();
        let b;
        if !free.is_empty() {
            let m = free.len();
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (k, &j) in free.iter().enumerate() {
                    mat[r][k] = q[i][j];
                }
                mat[r][m] = s[i];
                mat[m][r] = s[i];
                rhs[r] = 1.0 - (0..n).filter(|&j| state[j] == 2).map(|j| q[i][j] * c).sum::<f64>();
            }
            rhs[m] = -(0..n).filter(|&j| state[j] == 2).map(|j| s[j] * c).sum::<f64>();
            let Some(sol) = solve_linear(mat, rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
            b = sol[m];
            if free.iter().any(|&i| a[i] < -1e-9 || a[i] > c + 1e-9) {
                continue;
            }
        } else {
            let bal: f64 = a.iter().zip(&s).map(|(v, si)| v * si).sum();
            if bal.abs() > 1e-9 {
                continue;
            }
            // with no free point the bias is any value in the feasible interval
            let grads: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0).collect();
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                // need grad_i + b s_i >= 0 at zero, <= 0 at C
                let bound = -grads[i] * s[i];
                let lower = (state[i] == 0) == (s[i] > 0.0);
                if lower {
                    lo = lo.max(bound);
                } else {
                    hi = hi.min(bound);
                }
            }
            if lo > hi + 1e-9 {
                continue;
            }
            best = best.max(dual(&a));
            continue;
        }
        let bal: f64 = a.iter().zip(&s).map(|(v, si)| v * si).sum();
        if bal.abs() > 1e-9 {
            continue;
        }
        let ok = (0..n).all(|i| {
            let g = (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0 + b * s[i];
            match state[i] {
                0 => g >= -1e-9,
                2 => g <= 1e-9,
                _ => true,
            }
        });
        if ok {
            best = best.max(dual(&a));
        }
    }
    best
}

pub fn clusters(n_classes: usize, per: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in 0..n_classes {
        let center: Vec<f64> = (0..dim).map(|d| if (c >> d) & 1 == 1 { 4.0 } else { -4.0 }).collect();
        for _ in 0..per {
            x.push(center.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect());
            y.push(c);
        }
    }
    (x, y)
}

pub fn tuple_data(seed: u64) -> (Vec<Vec<f64>>, Vec<(usize, usize)>) {
    let (x, y) = clusters(N_TUPLES, 12, 3, seed);
    // a constant feature stands in for the bias
    let x = x.into_iter().map(|mut r| {
        r.push(1.0);
        r
    });
    let tuples = y.iter().map(|&c| (c / 4, c % 4)).collect();
    (x.collect(), tuples)
}
