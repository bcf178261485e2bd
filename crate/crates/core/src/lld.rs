//! Frame-level low-level descriptors: MFCC, zero-crossing rate, voicing
//! probability and fundamental frequency.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::FrameSequence;
use crate::error::{Error, Result};

const PRE_EMPHASIS: f64 = 0.97;

/// Among autocorrelation peaks, the shortest lag whose height reaches this
/// fraction of the tallest one is taken as the period. Suppresses octave
/// errors on strongly periodic frames.
const PEAK_RATIO: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct LldConfig {
    pub n_mfcc: usize,
    pub n_mel_filters: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub fmax: Option<f64>,
    pub log_floor: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub voicing_threshold: f64,
}

impl Default for LldConfig {
    fn default() -> Self {
        Self {
            n_mfcc: 12,
            n_mel_filters: 26,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
            f0_min: 80.0,
            f0_max: 500.0,
            voicing_threshold: 0.35,
        }
    }
}

impl LldConfig {
    pub fn fmax_for(&self, rate: u32) -> f64 {
        self.fmax.unwrap_or(f64::from(rate) / 2.0)
    }

    /// Number of descriptors per frame.
    pub fn k(&self) -> usize {
        self.n_mfcc + 3
    }

    pub fn descriptor_names(&self) -> Vec<String> {
        (1..=self.n_mfcc)
            .map(|i| format!("mfcc{i}"))
            .chain(["zcr", "voiceprob", "f0"].map(String::from))
            .collect()
    }

    pub fn validate(&self, rate: u32) -> Result<()> {
        let nyquist = f64::from(rate) / 2.0;
        let fmax = self.fmax_for(rate);
        if rate == 0 {
            return Err(Error::BadConfig("sample rate must be positive".into()));
        }
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= nyquist) {
            return Err(Error::BadConfig(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin={} fmax={fmax}",
                self.fmin
            )));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mel_filters {
            return Err(Error::BadConfig(format!(
                "need 0 < n_mfcc <= n_mel_filters, got {} and {}",
                self.n_mfcc, self.n_mel_filters
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::BadConfig("log_floor must be positive".into()));
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return Err(Error::BadConfig(format!(
                "need 0 < f0_min < f0_max, got {} and {}",
                self.f0_min, self.f0_max
            )));
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return Err(Error::BadConfig("voicing_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filter stored as its first nonzero bin plus weights.
#[derive(Clone, Debug)]
struct MelFilter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Precomputed MFCC pipeline for one frame length and sample rate.
#[derive(Clone)]
pub struct MfccExtractor {
    frame_len: usize,
    n_mfcc: usize,
    log_floor: f64,
    window: Vec<f64>,
    filters: Vec<MelFilter>,
    /// DCT-II rows 1..=n_mfcc, each of length n_mel_filters.
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(frame_len: usize, rate: u32, cfg: &LldConfig) -> Result<Self> {
        cfg.validate(rate)?;
        if frame_len < 2 {
            return Err(Error::BadConfig("MFCC needs frames of at least 2 samples".into()));
        }
        let window = (0..frame_len)
            .map(|n| {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (frame_len - 1) as f64).cos()
            })
            .collect();

        let n_bins = frame_len / 2 + 1;
        let bin_hz = f64::from(rate) / frame_len as f64;
        let mel_lo = hz_to_mel(cfg.fmin);
        let mel_hi = hz_to_mel(cfg.fmax_for(rate));
        let m = cfg.n_mel_filters;
        let edges: Vec<f64> = (0..m + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (m + 1) as f64))
            .collect();
        let filters = (0..m)
            .map(|j| {
                let (lo, center, hi) = (edges[j], edges[j + 1], edges[j + 2]);
                let mut first_bin = n_bins;
                let mut weights = Vec::new();
                for b in 0..n_bins {
                    let f = b as f64 * bin_hz;
                    let w = if f > lo && f <= center {
                        (f - lo) / (center - lo)
                    } else if f > center && f < hi {
                        (hi - f) / (hi - center)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        if weights.is_empty() {
                            first_bin = b;
                        }
                        weights.resize(b - first_bin, 0.0);
                        weights.push(w);
                    }
                }
                MelFilter { first_bin, weights }
            })
            .collect();

        let scale = (2.0 / m as f64).sqrt();
        let dct = (1..=cfg.n_mfcc)
            .map(|k| {
                (0..m)
                    .map(|i| {
                        scale
                            * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64
                                / (2 * m) as f64)
                                .cos()
                    })
                    .collect()
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        Ok(Self {
            frame_len,
            n_mfcc: cfg.n_mfcc,
            log_floor: cfg.log_floor,
            window,
            filters,
            dct,
            fft,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Coefficients 1..=n_mfcc of one frame.
    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.frame_len {
            return Err(Error::DimensionMismatch {
                expected: self.frame_len,
                found: frame.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .enumerate()
            .map(|(n, &x)| {
                let prev = if n == 0 { 0.0 } else { frame[n - 1] };
                Complex::new((x - PRE_EMPHASIS * prev) * self.window[n], 0.0)
            })
            .collect();
        self.fft.process(&mut buf);
        let magnitude: Vec<f64> = buf[..self.frame_len / 2 + 1].iter().map(|c| c.norm()).collect();

        let log_energy: Vec<f64> = self
            .filters
            .iter()
            .map(|f| {
                let e: f64 = f
                    .weights
                    .iter()
                    .zip(&magnitude[f.first_bin.min(magnitude.len())..])
                    .map(|(w, m)| w * m)
                    .sum();
                e.max(self.log_floor).ln()
            })
            .collect();

        // rows 1.. are orthogonal to constants
        if log_energy.iter().all(|&e| e == log_energy[0]) {
            return Ok(vec![0.0; self.n_mfcc]);
        }
        Ok(self
            .dct
            .iter()
            .map(|row| row.iter().zip(&log_energy).map(|(c, e)| c * e).sum())
            .collect())
    }

    pub fn n_mfcc(&self) -> usize {
        self.n_mfcc
    }
}

/// MFCCs of a single frame. Builds a fresh extractor; prefer
/// [`MfccExtractor`] when processing many frames.
pub fn mfcc(frame: &[f64], rate: u32, cfg: &LldConfig) -> Result<Vec<f64>> {
    MfccExtractor::new(frame.len(), rate, cfg)?.compute(frame)
}

/// Fraction of adjacent sample pairs whose signs differ (zero counts as positive).
pub fn zcr(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame
        .windows(2)
        .filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0))
        .count();
    crossings as f64 / (frame.len() - 1) as f64
}

/// Voicing probability and F0 estimate of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pitch {
    pub voice_prob: f64,
    pub f0: f64,
}

/// Normalized autocorrelation pitch analysis.
///
/// The correlation at lag `tau` is normalized by the energies of the two
/// overlapping segments, so a periodic frame scores 1 at its period.
pub fn pitch(frame: &[f64], rate: u32, cfg: &LldConfig) -> Pitch {
    let unvoiced = Pitch {
        voice_prob: 0.0,
        f0: 0.0,
    };
    let rate_f = f64::from(rate);
    let lag_min = ((rate_f / cfg.f0_max).floor() as usize).max(1);
    let lag_max = (rate_f / cfg.f0_min).ceil() as usize;
    let n = frame.len();
    if n < 2 || n < lag_max + 2 || lag_min > lag_max {
        return unvoiced;
    }

    let mean = frame.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let raw_energy: f64 = frame.iter().map(|v| v * v).sum();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= 1e-20 * n as f64 || energy <= 1e-12 * raw_energy {
        return unvoiced;
    }
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v * v;
    }

    // r over lag_min-1 ..= lag_max+1 so every in-band lag has two neighbours
    let lo = lag_min - 1;
    let corr: Vec<f64> = (lo..=lag_max + 1)
        .map(|tau| {
            let head = prefix[n - tau];
            let tail = prefix[n] - prefix[tau];
            let denom = (head * tail).sqrt();
            if denom <= 0.0 {
                return 0.0;
            }
            let num: f64 = x[..n - tau].iter().zip(&x[tau..]).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect();
    let r = |tau: usize| corr[tau - lo];

    let best = (lag_min..=lag_max).map(r).fold(f64::NEG_INFINITY, f64::max);
    let voice_prob = best.clamp(0.0, 1.0);
    if voice_prob < cfg.voicing_threshold || voice_prob <= 0.0 {
        return Pitch { voice_prob, f0: 0.0 };
    }

    let peak = (lag_min..=lag_max)
        .find(|&tau| r(tau) >= r(tau - 1) && r(tau) >= r(tau + 1) && r(tau) >= PEAK_RATIO * best)
        .unwrap_or_else(|| {
            (lag_min..=lag_max)
                .max_by(|&a, &b| r(a).total_cmp(&r(b)).then(b.cmp(&a)))
                .expect("nonempty lag band")
        });

    let (left, mid, right) = (r(peak - 1), r(peak), r(peak + 1));
    let curvature = left - 2.0 * mid + right;
    let offset = if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = (rate_f / (peak as f64 + offset)).clamp(cfg.f0_min, cfg.f0_max);
    Pitch { voice_prob, f0 }
}

pub fn voice_prob(frame: &[f64], rate: u32, cfg: &LldConfig) -> f64 {
    pitch(frame, rate, cfg).voice_prob
}

/// Fundamental frequency in Hz, 0 for unvoiced frames.
pub fn f0(frame: &[f64], rate: u32, cfg: &LldConfig) -> f64 {
    pitch(frame, rate, cfg).f0
}

/// Per-frame descriptor matrix (T x k), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LldMatrix {
    values: Vec<f64>,
    names: Vec<String>,
}

impl LldMatrix {
    pub fn new(values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let k = names.len();
        if k == 0 || values.len() % k != 0 || values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: values.len(),
            });
        }
        Ok(Self { values, names })
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn n_frames(&self) -> usize {
        self.values.len() / self.k()
    }

    pub fn descriptor_names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.k();
        &self.values[t * k..(t + 1) * k]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.k()).copied().collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dump as CSV: `frame_index,<descriptor names>`.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        let mut header = vec!["frame_index".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(ser)?;
        for t in 0..self.n_frames() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Compute `[mfcc1..mfccN, zcr, voiceprob, f0]` for every frame.
pub fn extract_llds(frames: &FrameSequence, cfg: &LldConfig) -> Result<LldMatrix> {
    let rate = frames.sample_rate();
    let extractor = MfccExtractor::new(frames.window_len(), rate, cfg)?;
    let mut values = Vec::with_capacity(frames.n_frames() * cfg.k());
    for frame in frames.iter() {
        values.extend(extractor.compute(frame)?);
        values.push(zcr(frame));
        let p = pitch(frame, rate, cfg);
        values.push(p.voice_prob);
        values.push(p.f0);
    }
    LldMatrix::new(values, cfg.descriptor_names())
}
