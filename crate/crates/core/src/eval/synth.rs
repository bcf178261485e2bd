//! Seeded synthetic corpus with known acoustic structure.
//!
//! Every utterance is a harmonic tone. Emotion selects an acoustic pattern:
//! an F0 band, a signed F0 glide across the utterance and an
//! amplitude-modulation rate. The default patterns form a 2x2 design (low or
//! high band, rising or falling glide). Spontaneity sets a per-utterance cue value:
//! the dialog's class mean plus i.i.d. Gaussian noise of width
//! `noise_sigma`. The cue sets the log-level of a weak band of breath noise
//! high in the spectrum and how strongly that level wobbles within the
//! utterance. The band is quiet next to the voiced part but dominates the
//! upper spectrum, so it shows up in the log mel spectrum (MFCCs and their
//! deltas) while leaving zero crossings, voicing and F0 nearly untouched. Averaging over consecutive utterances of
//! a dialog suppresses the per-utterance cue noise.
//!
//! With `branch_divergence`, spontaneous dialogs use the emotion-to-band
//! mapping rotated by one, so a given band means a different emotion
//! depending on spontaneity.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_manifest, write_wav, Corpus, Emotion, Spontaneity, Utterance, Waveform};
use crate::error::{Error, Result};

/// Breath band RMS relative to the voiced part at cue 0.
const BREATH_LEVEL: f64 = 0.02;
/// Natural-log change of the breath level per unit of cue.
const BREATH_SLOPE: f64 = 1.2;
const BREATH_CENTER: f64 = 3600.0;
const BREATH_WIDTH: f64 = 800.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneBand {
    pub f0_lo: f64,
    pub f0_hi: f64,
    /// Relative F0 change from start to end of the utterance.
    pub glide: f64,
    /// Amplitude modulation rate in Hz.
    pub am_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_dialogs: usize,
    pub utterances_per_dialog: usize,
    pub spont_fraction: f64,
    /// Distance between the scripted and spontaneous cue means.
    pub centroid_separation: f64,
    /// Per-utterance standard deviation of the spontaneity cue.
    pub noise_sigma: f64,
    pub branch_divergence: bool,
    /// Indexed by acoustic pattern (the emotion index for scripted speech).
    pub tone_bands: [ToneBand; 4],
    pub sample_rate: u32,
    pub utterance_secs: f64,
    pub n_sessions: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_dialogs: 25,
            utterances_per_dialog: 10,
            spont_fraction: 0.5,
            centroid_separation: 1.0,
            noise_sigma: 0.35,
            branch_divergence: true,
            tone_bands: [
                ToneBand { f0_lo: 110.0, f0_hi: 130.0, glide: 0.25, am_rate: 3.0 },
                ToneBand { f0_lo: 110.0, f0_hi: 130.0, glide: -0.25, am_rate: 5.0 },
                ToneBand { f0_lo: 230.0, f0_hi: 270.0, glide: 0.25, am_rate: 7.0 },
                ToneBand { f0_lo: 230.0, f0_hi: 270.0, glide: -0.25, am_rate: 9.0 },
            ],
            sample_rate: 16000,
            utterance_secs: 0.5,
            n_sessions: 5,
            seed: 2018,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_dialogs == 0 || self.utterances_per_dialog == 0 {
            return Err(Error::BadConfig("synthetic corpus needs dialogs and utterances".into()));
        }
        if !(self.centroid_separation > 0.0) {
            return Err(Error::BadConfig("centroid_separation must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::BadConfig("noise_sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.spont_fraction) {
            return Err(Error::BadConfig("spont_fraction must lie in [0, 1]".into()));
        }
        if self.sample_rate < 8000 || !(self.utterance_secs > 0.0) {
            return Err(Error::BadConfig("need sample_rate >= 8000 and positive duration".into()));
        }
        if self.n_sessions == 0 {
            return Err(Error::BadConfig("n_sessions must be positive".into()));
        }
        for b in &self.tone_bands {
            if !(b.f0_lo > 0.0 && b.f0_lo <= b.f0_hi && b.am_rate >= 0.0 && b.glide.abs() < 1.0) {
                return Err(Error::BadConfig(format!("invalid tone band {b:?}")));
            }
        }
        Ok(())
    }

    /// Acoustic pattern used for an emotion in a dialog of the given kind.
    pub fn pattern(&self, emotion: Emotion, spontaneity: Spontaneity) -> usize {
        let shift = usize::from(self.branch_divergence && spontaneity == Spontaneity::Spontaneous);
        (emotion.index() + shift) % Emotion::COUNT
    }

    fn cue_mean(&self, spontaneity: Spontaneity) -> f64 {
        let half = self.centroid_separation / 2.0;
        match spontaneity {
            Spontaneity::Scripted => 0.5 - half,
            Spontaneity::Spontaneous => 0.5 + half,
        }
    }
}

/// Render one utterance. `cue` is the spontaneity cue value; nominal
/// values lie in [0, 1].
pub fn synth_waveform(
    band: &ToneBand,
    cue: f64,
    sample_rate: u32,
    secs: f64,
    rng: &mut impl Rng,
    utterance_id: &str,
) -> Result<Waveform> {
    let rate = f64::from(sample_rate);
    let n = (secs * rate).round().max(1.0) as usize;
    let cue = cue.clamp(-1.0, 2.0);
    let f0 = rng.random_range(band.f0_lo..=band.f0_hi);
    let contour_phase = rng.random_range(0.0..2.0 * PI);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let wobble_phase = rng.random_range(0.0..2.0 * PI);

    let wobble_depth = 0.3 + 0.5 * cue.max(0.0);
    let top = 0.45 * rate;
    let radius = (-PI * BREATH_WIDTH / rate).exp();
    let theta = 2.0 * PI * BREATH_CENTER.min(top) / rate;

    let lowest = band.f0_lo * (1.0 - band.glide.abs() / 2.0) * 0.98;
    let n_harmonics = (top / lowest).floor() as usize;
    let mut phases = vec![0.0f64; n_harmonics];
    let mut voiced = Vec::with_capacity(n);
    let mut breath = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    for i in 0..n {
        let t = i as f64 / rate;
        let progress = i as f64 / n as f64 - 0.5;
        let pitch = f0
            * (1.0 + band.glide * progress)
            * (1.0 + 0.01 * (2.0 * PI * 1.5 * t + contour_phase).sin());
        let mut v = 0.0;
        for (h, phase) in phases.iter_mut().enumerate() {
            let freq = pitch * (h + 1) as f64;
            if freq >= top {
                break;
            }
            *phase += 2.0 * PI * freq / rate;
            v += phase.sin() / ((h + 1) as f64).powi(2);
        }

        // two-pole resonator on white noise
        let excitation: f64 = rng.random_range(-1.0..=1.0);
        let y = excitation + 2.0 * radius * theta.cos() * y1 - radius * radius * y2;
        y2 = y1;
        y1 = y;

        let envelope = 0.7 + 0.3 * (2.0 * PI * band.am_rate * t + am_phase).sin();
        let wobble = wobble_depth * (2.0 * PI * 4.0 * t + wobble_phase).sin();
        voiced.push(v * envelope);
        breath.push(y);
        level.push(envelope * (BREATH_SLOPE * (cue + wobble)).exp());
    }

    let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt().max(1e-12);
    let mix = BREATH_LEVEL * rms(&voiced) / rms(&breath);
    let out: Vec<f64> = voiced
        .iter()
        .zip(breath.iter().zip(&level))
        .map(|(v, (b, l))| v + mix * l * b)
        .collect();

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let samples = out
        .into_iter()
        .map(|v| (0.5 * v / peak + rng.random_range(-0.005..=0.005)).clamp(-1.0, 1.0))
        .collect();
    Waveform::new(samples, sample_rate, utterance_id)
}

/// A generated corpus and where its manifest was written.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub manifest_path: PathBuf,
    /// Spontaneity cue of every utterance, in corpus order.
    pub cues: Vec<f64>,
}

/// Write WAV files under `out_dir/wav/` and `out_dir/manifest.csv`.
pub fn gen_synth_corpus(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<SynthCorpus> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_spont = (spec.spont_fraction * spec.n_dialogs as f64).round() as usize;
    let mut kinds: Vec<Spontaneity> = (0..spec.n_dialogs)
        .map(|d| {
            if d < n_spont {
                Spontaneity::Spontaneous
            } else {
                Spontaneity::Scripted
            }
        })
        .collect();
    kinds.shuffle(&mut rng);

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::BadConfig(format!("noise_sigma: {e}")))?;
    let mut utterances = Vec::new();
    let mut cues = Vec::new();
    for (d, &spontaneity) in kinds.iter().enumerate() {
        let dialog_id = format!("dlg{d:03}");
        let session_id = format!("S{}", d % spec.n_sessions + 1);
        for u in 0..spec.utterances_per_dialog {
            let utterance_id = format!("{dialog_id}_u{u:02}");
            let emotion = Emotion::from_index(rng.random_range(0..Emotion::COUNT)).expect("in range");
            let cue = spec.cue_mean(spontaneity) + noise.sample(&mut rng);
            let band = &spec.tone_bands[spec.pattern(emotion, spontaneity)];
            let wave = synth_waveform(
                band,
                cue,
                spec.sample_rate,
                spec.utterance_secs,
                &mut rng,
                &utterance_id,
            )?;
            let rel = PathBuf::from("wav").join(format!("{utterance_id}.wav"));
            write_wav(&wave, out_dir.join(&rel))?;
            utterances.push(Utterance {
                utterance_id,
                wav_path: rel,
                session_id: session_id.clone(),
                dialog_id: dialog_id.clone(),
                speaker_id: if u % 2 == 0 { "A" } else { "B" }.to_string(),
                spontaneity,
                emotion,
            });
            cues.push(cue);
        }
    }

    let corpus = Corpus::new(utterances, out_dir)?;
    let manifest_path = out_dir.join("manifest.csv");
    let file = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    write_manifest(&corpus, std::io::BufWriter::new(file))?;
    Ok(SynthCorpus {
        corpus,
        manifest_path,
        cues,
    })
}
