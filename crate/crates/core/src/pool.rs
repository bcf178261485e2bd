//! Temporal pooling of descriptor tracks into fixed-length utterance
//! features, and concatenation of consecutive utterances into context
//! features.
//!
//! Each descriptor track is smoothed, its regression delta is taken, and
//! twelve functionals are computed over both, giving `24 * k` values per
//! utterance. The layout is track-major: descriptor `j` occupies
//! `[24j, 24j + 12)` for the smoothed track and `[24j + 12, 24j + 24)` for
//! its delta.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lld::LldMatrix;

pub const N_FUNCTIONALS: usize = 12;

/// Values per descriptor in a pooled feature (base and delta functionals).
pub const PER_DESCRIPTOR: usize = 2 * N_FUNCTIONALS;

pub const FUNCTIONAL_NAMES: [&str; N_FUNCTIONALS] = [
    "mean", "stddev", "kurtosis", "skewness", "min", "max", "range", "minpos", "maxpos", "slope",
    "offset", "mse",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub sma_window: usize,
    pub delta_window: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            sma_window: 3,
            delta_window: 2,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sma_window == 0 || self.sma_window % 2 == 0 {
            return Err(Error::BadConfig(format!(
                "sma_window must be odd and positive, got {}",
                self.sma_window
            )));
        }
        if self.delta_window == 0 {
            return Err(Error::BadConfig("delta_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Centered moving average; the window shrinks to the in-range frames at
/// the edges.
pub fn smooth(track: &[f64], sma_window: usize) -> Result<Vec<f64>> {
    if sma_window == 0 || sma_window % 2 == 0 {
        return Err(Error::BadConfig(format!(
            "sma_window must be odd and positive, got {sma_window}"
        )));
    }
    let half = sma_window / 2;
    let n = track.len();
    Ok((0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            track[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Regression delta with half-width `delta_window`, edges replicate-padded.
pub fn delta(track: &[f64], delta_window: usize) -> Result<Vec<f64>> {
    if delta_window == 0 {
        return Err(Error::BadConfig("delta_window must be at least 1".into()));
    }
    let n = track.len();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let last = n as isize - 1;
    let at = |i: isize| track[i.clamp(0, last) as usize];
    let norm = 2.0 * (1..=delta_window).map(|k| (k * k) as f64).sum::<f64>();
    Ok((0..n as isize)
        .map(|t| {
            (1..=delta_window as isize)
                .map(|k| k as f64 * (at(t + k) - at(t - k)))
                .sum::<f64>()
                / norm
        })
        .collect())
}

/// The twelve statistics of one track, in [`FUNCTIONAL_NAMES`] order.
///
/// Moments are population moments; kurtosis is excess kurtosis. A
/// constant track has skewness and kurtosis 0.
pub fn functionals(track: &[f64]) -> [f64; N_FUNCTIONALS] {
    let n = track.len();
    if n == 0 {
        return [0.0; N_FUNCTIONALS];
    }
    let nf = n as f64;
    let mean = track.iter().sum::<f64>() / nf;

    let (mut argmin, mut argmax) = (0, 0);
    for (i, &v) in track.iter().enumerate() {
        if v < track[argmin] {
            argmin = i;
        }
        if v > track[argmax] {
            argmax = i;
        }
    }
    let (min, max) = (track[argmin], track[argmax]);
    let constant = min == max;

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    if !constant {
        for &v in track {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
    }
    let (stddev, skewness, kurtosis) = if constant || m2 == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let rel = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };

    let t_mean = (nf - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &v) in track.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 && !constant { sxy / sxx } else { 0.0 };
    let offset = mean - slope * t_mean;
    let mse = track
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            let e = v - (offset + slope * t as f64);
            e * e
        })
        .sum::<f64>()
        / nf;

    [
        mean,
        stddev,
        kurtosis,
        skewness,
        min,
        max,
        max - min,
        rel(argmin),
        rel(argmax),
        slope,
        offset,
        mse,
    ]
}

/// Pooled utterance feature of dimension `24 * k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFeature {
    pub utterance_id: String,
    pub values: Vec<f64>,
}

impl GlobalFeature {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn pool_global(
    llds: &LldMatrix,
    cfg: &PoolConfig,
    utterance_id: impl Into<String>,
) -> Result<GlobalFeature> {
    cfg.validate()?;
    let mut values = Vec::with_capacity(PER_DESCRIPTOR * llds.k());
    for j in 0..llds.k() {
        let smoothed = smooth(&llds.column(j), cfg.sma_window)?;
        let deltas = delta(&smoothed, cfg.delta_window)?;
        values.extend(functionals(&smoothed));
        values.extend(functionals(&deltas));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("pooled feature contains {v}")));
    }
    Ok(GlobalFeature {
        utterance_id: utterance_id.into(),
        values,
    })
}

/// Concatenation of `ell` consecutive utterance features ending at an anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextFeature {
    pub anchor_id: String,
    pub ell: usize,
    pub values: Vec<f64>,
}

/// Concatenate the features of the `ell` utterances ending at `anchor`
/// within one dialog, oldest first. Missing predecessors are filled by
/// repeating the dialog's first feature.
pub fn concat_context(dialog: &[GlobalFeature], anchor: usize, ell: usize) -> Result<ContextFeature> {
    if ell == 0 {
        return Err(Error::BadConfig("context length must be at least 1".into()));
    }
    let rows: Vec<&[f64]> = dialog.iter().map(|f| f.values.as_slice()).collect();
    let values = context_vector(&rows, anchor, ell)?;
    Ok(ContextFeature {
        anchor_id: dialog[anchor].utterance_id.clone(),
        ell,
        values,
    })
}

/// Slice-level form of [`concat_context`].
pub fn context_vector(dialog: &[&[f64]], anchor: usize, ell: usize) -> Result<Vec<f64>> {
    if ell == 0 {
        return Err(Error::BadConfig("context length must be at least 1".into()));
    }
    if anchor >= dialog.len() {
        return Err(Error::BadConfig(format!(
            "anchor {anchor} outside dialog of {} utterances",
            dialog.len()
        )));
    }
    let d = dialog[anchor].len();
    let mut out = Vec::with_capacity(d * ell);
    for back in (0..ell).rev() {
        let row = dialog[anchor.saturating_sub(back)];
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

/// Utterance features plus the descriptor count they were pooled from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub k: usize,
    pub features: Vec<GlobalFeature>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        PER_DESCRIPTOR * self.k
    }

    pub fn get(&self, utterance_id: &str) -> Option<&GlobalFeature> {
        self.features.iter().find(|f| f.utterance_id == utterance_id)
    }

    /// Write the cache CSV: a `# d=<d> k=<k>` line, the header, one row per
    /// utterance. Values use shortest round-trip formatting.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        let d = self.dim();
        let ser = |e: std::io::Error| Error::Serialization(e.to_string());
        writeln!(writer, "# d={d} k={}", self.k).map_err(ser)?;
        let mut w = csv::Writer::from_writer(writer);
        let cerr = |e: csv::Error| Error::Serialization(e.to_string());
        let mut header = vec!["utterance_id".to_string()];
        header.extend((0..d).map(|i| format!("f_{i}")));
        w.write_record(&header).map_err(cerr)?;
        for f in &self.features {
            if f.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.dim(),
                });
            }
            let mut rec = vec![f.utterance_id.clone()];
            rec.extend(f.values.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(cerr)?;
        }
        w.flush().map_err(ser)
    }

    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut reader = reader;
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        let (d, k) = parse_sidecar(first.trim())?;
        if d != PER_DESCRIPTOR * k {
            return Err(Error::Serialization(format!("sidecar d={d} does not equal 24*k={}", PER_DESCRIPTOR * k)));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let cerr = |e: csv::Error| Error::Serialization(e.to_string());
        let header = rdr.headers().map_err(cerr)?;
        if header.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: header.len().saturating_sub(1),
            });
        }
        let mut features = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(cerr)?;
            let utterance_id = record.get(0).unwrap_or_default().to_string();
            let values = record
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Serialization(format!("bad number {s:?} for {utterance_id}")))
                })
                .collect::<Result<Vec<_>>>()?;
            features.push(GlobalFeature { utterance_id, values });
        }
        Ok(Self { k, features })
    }
}

fn parse_sidecar(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::Serialization(format!("expected '# d=<d> k=<k>', found {line:?}"));
    let rest = line.strip_prefix('#').ok_or_else(bad)?;
    let (mut d, mut k) = (None, None);
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("d=") {
            d = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("k=") {
            k = v.parse().ok();
        }
    }
    Ok((d.ok_or_else(bad)?, k.ok_or_else(bad)?))
}
