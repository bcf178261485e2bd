use super::{train_binary, BinarySvm, TrainConfig};
use crate::error::{Error, Result};

/// Scorer for one class of a one-vs-rest model.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassScorer {
    Trained(BinarySvm),
    /// The class had no training samples; scores negative infinity.
    Absent,
}

impl ClassScorer {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            ClassScorer::Trained(m) => m.margin(x),
            ClassScorer::Absent => Ok(f64::NEG_INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvrModel {
    pub scorers: Vec<ClassScorer>,
    pub dim: usize,
}

impl OvrModel {
    pub fn n_classes(&self) -> usize {
        self.scorers.len()
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        self.scorers.iter().map(|s| s.score(x)).collect()
    }

    /// Class with the largest margin; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let margins = self.margins(x)?;
        let mut best = 0;
        for (c, &m) in margins.iter().enumerate() {
            if m > margins[best] {
                best = c;
            }
        }
        Ok(best)
    }
}

/// One binary SVM per class, each separating that class from the rest.
/// Class `c` trains with seed `cfg.seed + c`.
pub fn train_multiclass_ovr(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<OvrModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::BadConfig(format!("class label {bad} outside 0..{n_classes}")));
    }
    let mut present = vec![false; n_classes];
    for &c in y {
        present[c] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = super::check_rows(x)?;
    let scorers = (0..n_classes)
        .map(|c| {
            if !present[c] {
                return Ok(ClassScorer::Absent);
            }
            let signs: Vec<i8> = y.iter().map(|&l| if l == c { 1 } else { -1 }).collect();
            let cfg = cfg.with_seed(cfg.seed.wrapping_add(c as u64));
            train_binary(x, &signs, &cfg).map(ClassScorer::Trained)
        })
        .collect::<Result<_>>()?;
    Ok(OvrModel { scorers, dim })
}
