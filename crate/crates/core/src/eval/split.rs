use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::Corpus;
use crate::error::{Error, Result};

/// How to divide a corpus into train and test parts. Dialogs are never split.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Every dialog of the named session is held out for testing.
    BySessionHoldout { session_id: String },
    /// A seeded random `fraction` of dialogs (rounded to nearest, at least
    /// one on each side) is held out.
    RandomByDialog { fraction: f64, seed: u64 },
}

/// Returns (train, test); both keep the corpus' dialog order.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::DegenerateSplit("corpus is empty".into()));
    }
    let n = corpus.n_dialogs();
    let mut is_test = vec![false; n];
    match spec {
        SplitSpec::BySessionHoldout { session_id } => {
            for (d, dialog) in corpus.dialogs().enumerate() {
                is_test[d] = dialog[0].session_id == *session_id;
            }
        }
        SplitSpec::RandomByDialog { fraction, seed } => {
            if !(*fraction > 0.0 && *fraction < 1.0) {
                return Err(Error::BadConfig(format!("split fraction {fraction} outside (0, 1)")));
            }
            if n < 2 {
                return Err(Error::DegenerateSplit(format!("{n} dialog(s) cannot be split")));
            }
            let n_test = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            for &d in &order[..n_test] {
                is_test[d] = true;
            }
        }
    }
    let test: Vec<usize> = (0..n).filter(|&d| is_test[d]).collect();
    let train: Vec<usize> = (0..n).filter(|&d| !is_test[d]).collect();
    if test.is_empty() {
        return Err(Error::DegenerateSplit("test part is empty".into()));
    }
    if train.is_empty() {
        return Err(Error::DegenerateSplit("train part is empty".into()));
    }
    Ok((corpus.select_dialogs(&train), corpus.select_dialogs(&test)))
}
