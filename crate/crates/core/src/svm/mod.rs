//! Max-margin classifiers: a pairwise dual solver for binary soft-margin
//! SVMs, a one-vs-rest multiclass wrapper and the joint linear classifier
//! over (spontaneity, emotion) tuples.

mod joint;
mod ovr;
mod scale;
mod smo;

pub use joint::{
    joint_loss, predict_joint, row_tuple, train_joint, tuple_row, JointModel, N_TUPLES,
};
pub use ovr::{train_multiclass_ovr, ClassScorer, OvrModel};
pub use scale::Standardizer;
pub use smo::{predict_binary, solve_dual, train_binary, BinarySvm, DualSolution};

use crate::error::{Error, Result};

/// A concrete kernel function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::BadConfig(format!("rbf gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = x
                    .iter()
                    .zip(z)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-gamma * sq).exp()
            }
        }
    }
}

pub fn kernel_eval(x: &[f64], z: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok(spec.eval(x, z))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Training hyperparameters shared by every solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Slack penalty weight.
    pub c: f64,
    pub kernel: KernelKind,
    /// RBF width; `None` means `1 / d` for `d`-dimensional inputs.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Binary solver: pair updates are capped at `max_passes * n`.
    /// Joint solver: maximum number of epochs.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelKind::Rbf,
            gamma: None,
            tolerance: 1e-3,
            max_passes: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::BadConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::BadConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::BadConfig("max_passes must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            KernelSpec::Rbf { gamma: g }.validate()?;
        }
        Ok(())
    }

    /// The kernel to use for `dim`-dimensional inputs.
    pub fn kernel_for(&self, dim: usize) -> KernelSpec {
        match self.kernel {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Rbf => KernelSpec::Rbf {
                gamma: self.gamma.unwrap_or(1.0 / dim.max(1) as f64),
            },
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Check that all rows share one dimension and hold only finite values.
pub(crate) fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map(Vec::len).unwrap_or(0);
    for row in x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {v}")));
        }
    }
    Ok(dim)
}
