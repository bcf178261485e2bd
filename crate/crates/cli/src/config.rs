//! Run configuration: TOML file sections merged over defaults, then flag
//! overrides on top.

use std::path::Path;

use serde::Deserialize;
use ser_core::audio::FramingConfig;
use ser_core::eval::{SplitSpec, SynthSpec};
use ser_core::features::FeatureConfig;
use ser_core::lld::LldConfig;
use ser_core::pool::PoolConfig;
use ser_core::svm::{KernelKind, TrainConfig};

pub const DEFAULT_SEED: u64 = 2018;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub framing: FramingSection,
    #[serde(default)]
    pub lld: LldSection,
    #[serde(default)]
    pub pool: PoolSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub context: ContextSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramingSection {
    pub window_ms: Option<f64>,
    pub stride_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LldSection {
    pub n_mfcc: Option<usize>,
    pub n_mel_filters: Option<usize>,
    pub fmin: Option<f64>,
    pub fmax: Option<f64>,
    pub log_floor: Option<f64>,
    pub f0_min: Option<f64>,
    pub f0_max: Option<f64>,
    pub voicing_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSection {
    pub sma_window: Option<usize>,
    pub delta_window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub c: Option<f64>,
    pub kernel: Option<String>,
    pub gamma: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_passes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// `by_session_holdout` or `random_by_dialog`.
    pub scheme: Option<String>,
    pub holdout_session: Option<String>,
    pub fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSection {
    pub ell: Option<usize>,
    pub ells: Option<Vec<usize>>,
    pub ablation_ell: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_dialogs: Option<usize>,
    pub utterances_per_dialog: Option<usize>,
    pub spont_fraction: Option<f64>,
    pub centroid_separation: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub branch_divergence: Option<bool>,
    pub sample_rate: Option<u32>,
    pub utterance_secs: Option<f64>,
    pub n_sessions: Option<usize>,
}

/// How the split section names the held-out part.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitChoice {
    /// Hold out one session; `None` picks the last session id in sort order.
    Session(Option<String>),
    Random { fraction: f64, seed: u64 },
}

/// Merged settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub split: SplitChoice,
    pub ell: usize,
    pub ells: Vec<usize>,
    pub ablation_ell: usize,
    pub synth: SynthSpec,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Apply this file over the defaults; `seed` overrides the file's seed.
    pub fn resolve(self, seed: Option<u64>) -> Result<RunConfig, String> {
        let seed = seed.or(self.seed).unwrap_or(DEFAULT_SEED);

        let mut framing = FramingConfig::default();
        set(&mut framing.window_ms, self.framing.window_ms);
        set(&mut framing.stride_ms, self.framing.stride_ms);
        if !(framing.window_ms > 0.0 && framing.stride_ms > 0.0) {
            return Err("framing window_ms and stride_ms must be positive".into());
        }

        let mut lld = LldConfig::default();
        let l = self.lld;
        set(&mut lld.n_mfcc, l.n_mfcc);
        set(&mut lld.n_mel_filters, l.n_mel_filters);
        set(&mut lld.fmin, l.fmin);
        lld.fmax = l.fmax.or(lld.fmax);
        set(&mut lld.log_floor, l.log_floor);
        set(&mut lld.f0_min, l.f0_min);
        set(&mut lld.f0_max, l.f0_max);
        set(&mut lld.voicing_threshold, l.voicing_threshold);

        let mut pool = PoolConfig::default();
        set(&mut pool.sma_window, self.pool.sma_window);
        set(&mut pool.delta_window, self.pool.delta_window);
        pool.validate().map_err(|e| e.to_string())?;

        let mut train = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let t = self.train;
        set(&mut train.c, t.c);
        train.gamma = t.gamma.or(train.gamma);
        set(&mut train.tolerance, t.tolerance);
        set(&mut train.max_passes, t.max_passes);
        if let Some(k) = t.kernel {
            train.kernel = match k.as_str() {
                "linear" => KernelKind::Linear,
                "rbf" => KernelKind::Rbf,
                other => return Err(format!("unknown kernel {other:?}")),
            };
        }
        train.validate().map_err(|e| e.to_string())?;

        let s = self.split;
        let split = match s.scheme.as_deref().unwrap_or("by_session_holdout") {
            "by_session_holdout" => SplitChoice::Session(s.holdout_session),
            "random_by_dialog" => SplitChoice::Random {
                fraction: s.fraction.unwrap_or(0.2),
                seed: s.seed.unwrap_or(seed),
            },
            other => return Err(format!("unknown split scheme {other:?}")),
        };

        let c = self.context;
        let ell = c.ell.unwrap_or(10);
        let ells = c.ells.unwrap_or_else(|| vec![1, 2, 4, 6, 8, 10]);
        let ablation_ell = c.ablation_ell.unwrap_or(1);
        if ell == 0 || ablation_ell == 0 || ells.is_empty() || ells.contains(&0) {
            return Err("context lengths must be at least 1".into());
        }

        let mut synth = SynthSpec {
            seed,
            ..SynthSpec::default()
        };
        let y = self.synth;
        set(&mut synth.n_dialogs, y.n_dialogs);
        set(&mut synth.utterances_per_dialog, y.utterances_per_dialog);
        set(&mut synth.spont_fraction, y.spont_fraction);
        set(&mut synth.centroid_separation, y.centroid_separation);
        set(&mut synth.noise_sigma, y.noise_sigma);
        set(&mut synth.branch_divergence, y.branch_divergence);
        set(&mut synth.sample_rate, y.sample_rate);
        set(&mut synth.utterance_secs, y.utterance_secs);
        set(&mut synth.n_sessions, y.n_sessions);

        Ok(RunConfig {
            seed,
            features: FeatureConfig { framing, lld, pool },
            train,
            split,
            ell,
            ells,
            ablation_ell,
            synth,
        })
    }
}

impl SplitChoice {
    pub fn to_spec(&self, corpus: &ser_core::audio::Corpus) -> SplitSpec {
        match self {
            SplitChoice::Session(Some(id)) => SplitSpec::BySessionHoldout { session_id: id.clone() },
            SplitChoice::Session(None) => {
                let last = corpus
                    .utterances()
                    .iter()
                    .map(|u| u.session_id.as_str())
                    .max()
                    .unwrap_or_default();
                SplitSpec::BySessionHoldout { session_id: last.to_string() }
            }
            SplitChoice::Random { fraction, seed } => SplitSpec::RandomByDialog {
                fraction: *fraction,
                seed: *seed,
            },
        }
    }
}
