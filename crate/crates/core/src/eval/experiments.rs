use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{Dataset, SpontaneityClassifier};
use crate::pool::{N_FUNCTIONALS, PER_DESCRIPTOR};
use crate::svm::TrainConfig;

/// Fraction of test utterances whose spontaneity is recovered by a
/// classifier trained on `train` with context length `ell`.
pub fn spontaneity_accuracy(train: &Dataset, test: &Dataset, ell: usize, cfg: &TrainConfig) -> Result<f64> {
    let clf = SpontaneityClassifier::train(train, ell, cfg)?;
    let mut correct = 0usize;
    for d in 0..test.dialogs.len() {
        let rows = test.dialog_features(d);
        let range = test.dialogs[d].clone();
        for (anchor, i) in range.enumerate() {
            let (s, _) = clf.decide(&rows, anchor)?;
            if s == test.spontaneity[i] {
                correct += 1;
            }
        }
    }
    if test.is_empty() {
        return Err(Error::DegenerateSplit("test part is empty".into()));
    }
    Ok(correct as f64 / test.len() as f64)
}

fn run_cells<T: Send, R: Send>(cells: Vec<T>, f: impl Fn(T) -> Result<R> + Sync) -> Result<Vec<R>> {
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = cells.into_iter().map(|c| scope.spawn(move || f(c))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::BadConfig("experiment cell panicked".into())))
            })
            .collect()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub ell: usize,
    pub accuracy: f64,
}

/// Spontaneity accuracy for each context length, sorted by length.
pub fn context_sweep(train: &Dataset, test: &Dataset, ells: &[usize], cfg: &TrainConfig) -> Result<Vec<SweepRow>> {
    if ells.is_empty() {
        return Err(Error::BadConfig("no context lengths given".into()));
    }
    let mut ells = ells.to_vec();
    ells.sort_unstable();
    ells.dedup();
    run_cells(ells, |ell| {
        Ok(SweepRow {
            ell,
            accuracy: spontaneity_accuracy(train, test, ell, cfg)?,
        })
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl std::io::Write) -> Result<()> {
    let mut out = String::from("ell,accuracy\n");
    for r in rows {
        out += &format!("{},{:.6}\n", r.ell, r.accuracy);
    }
    w.write_all(out.as_bytes())
        .map_err(|e| Error::Serialization(e.to_string()))
}

/// Descriptor families that can be excluded together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorGroup {
    Mfcc,
    Zcr,
    VoiceProb,
    F0,
}

impl DescriptorGroup {
    pub const ALL: [DescriptorGroup; 4] = [
        DescriptorGroup::Mfcc,
        DescriptorGroup::Zcr,
        DescriptorGroup::VoiceProb,
        DescriptorGroup::F0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorGroup::Mfcc => "mfcc",
            DescriptorGroup::Zcr => "zcr",
            DescriptorGroup::VoiceProb => "voiceprob",
            DescriptorGroup::F0 => "f0",
        }
    }

    fn owns(self, descriptor: &str) -> bool {
        match self {
            DescriptorGroup::Mfcc => descriptor
                .strip_prefix("mfcc")
                .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())),
            other => descriptor == other.name(),
        }
    }
}

impl FromStr for DescriptorGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DescriptorGroup::ALL
            .into_iter()
            .find(|g| g.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownDescriptor(s.to_string()))
    }
}

impl fmt::Display for DescriptorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationMode {
    /// Remove the functionals of both the descriptor and its delta.
    DropBaseAndDelta,
    /// Remove the descriptor's own functionals, keep those of its delta.
    DropBaseKeepDelta,
}

impl AblationMode {
    pub fn name(self) -> &'static str {
        match self {
            AblationMode::DropBaseAndDelta => "drop_base_and_delta",
            AblationMode::DropBaseKeepDelta => "drop_base_keep_delta",
        }
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "drop_base_and_delta" => Ok(AblationMode::DropBaseAndDelta),
            "drop_base_keep_delta" => Ok(AblationMode::DropBaseKeepDelta),
            other => Err(Error::BadConfig(format!("unknown ablation mode {other:?}"))),
        }
    }
}

/// Columns of a pooled feature that survive excluding `groups`.
///
/// Pooling treats every track independently, so selecting columns equals
/// re-pooling with the excluded tracks removed.
pub fn ablation_columns(
    descriptor_names: &[String],
    groups: &[DescriptorGroup],
    mode: AblationMode,
) -> Result<Vec<usize>> {
    let mut columns = Vec::new();
    for (j, name) in descriptor_names.iter().enumerate() {
        let base = j * PER_DESCRIPTOR;
        let excluded = groups.iter().any(|g| g.owns(name));
        if !excluded {
            columns.extend(base..base + PER_DESCRIPTOR);
        } else if mode == AblationMode::DropBaseKeepDelta {
            columns.extend(base + N_FUNCTIONALS..base + PER_DESCRIPTOR);
        }
    }
    if columns.is_empty() {
        return Err(Error::EmptyFeature);
    }
    Ok(columns)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub excluded: Vec<DescriptorGroup>,
    pub mode: AblationMode,
    pub dim: usize,
    pub accuracy: f64,
}

impl AblationRow {
    /// Exclusion set as `a+b`, or `none`.
    pub fn excluded_label(&self) -> String {
        if self.excluded.is_empty() {
            "none".into()
        } else {
            self.excluded.iter().map(|g| g.name()).collect::<Vec<_>>().join("+")
        }
    }
}

/// Retrain the spontaneity classifier (context length `ell`) on features
/// with the given descriptor groups removed, once per (set, mode) cell.
/// Rows come back in input order: sets outer, modes inner.
pub fn ablate_features(
    train: &Dataset,
    test: &Dataset,
    descriptor_names: &[String],
    exclusion_sets: &[Vec<DescriptorGroup>],
    modes: &[AblationMode],
    ell: usize,
    cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    if train.dim() != PER_DESCRIPTOR * descriptor_names.len() {
        return Err(Error::DimensionMismatch {
            expected: PER_DESCRIPTOR * descriptor_names.len(),
            found: train.dim(),
        });
    }
    let mut cells = Vec::new();
    for set in exclusion_sets {
        let mut set = set.clone();
        set.sort_unstable();
        set.dedup();
        for &mode in modes {
            let columns = ablation_columns(descriptor_names, &set, mode)?;
            cells.push((set.clone(), mode, columns));
        }
    }
    run_cells(cells, |(excluded, mode, columns)| {
        let tr = train.select_columns(&columns);
        let te = test.select_columns(&columns);
        Ok(AblationRow {
            excluded,
            mode,
            dim: columns.len(),
            accuracy: spontaneity_accuracy(&tr, &te, ell, cfg)?,
        })
    })
}

pub fn write_ablation_csv(rows: &[AblationRow], mut w: impl std::io::Write) -> Result<()> {
    let mut out = String::from("excluded,mode,dim,accuracy\n");
    for r in rows {
        out += &format!(
            "{},{},{},{:.6}\n",
            r.excluded_label(),
            r.mode.name(),
            r.dim,
            r.accuracy
        );
    }
    w.write_all(out.as_bytes())
        .map_err(|e| Error::Serialization(e.to_string()))
}
