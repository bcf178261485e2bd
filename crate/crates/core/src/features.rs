//! End-to-end acoustic feature extraction: waveform to pooled feature.

use crate::audio::{frame_signal, load_wav, Corpus, FramingConfig, Waveform};
use crate::error::{Error, Result};
use crate::lld::{extract_llds, LldConfig, LldMatrix};
use crate::pool::{pool_global, FeatureTable, GlobalFeature, PoolConfig};

/// Everything needed to turn audio into utterance features.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureConfig {
    pub framing: FramingConfig,
    pub lld: LldConfig,
    pub pool: PoolConfig,
}

impl FeatureConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        self.framing.to_samples(sample_rate)?;
        self.lld.validate(sample_rate)?;
        self.pool.validate()
    }
}

pub fn waveform_llds(wave: &Waveform, cfg: &FeatureConfig) -> Result<LldMatrix> {
    let (w, m) = cfg.framing.to_samples(wave.sample_rate())?;
    let frames = frame_signal(wave, w, m)?;
    extract_llds(&frames, &cfg.lld)
}

pub fn waveform_feature(wave: &Waveform, cfg: &FeatureConfig) -> Result<GlobalFeature> {
    let llds = waveform_llds(wave, cfg)?;
    pool_global(&llds, &cfg.pool, wave.utterance_id())
}

/// Load every utterance of the corpus and pool its features, in corpus
/// order. Utterances are processed on all available cores; the result does
/// not depend on the thread count.
pub fn extract_corpus(corpus: &Corpus, cfg: &FeatureConfig) -> Result<FeatureTable> {
    let utterances = corpus.utterances();
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(utterances.len().max(1));
    let chunk = utterances.len().div_ceil(threads).max(1);

    let results: Vec<Result<Vec<GlobalFeature>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = utterances
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|u| {
                            let path = corpus.wav_path(u);
                            load_wav(&path)
                                .and_then(|w| waveform_feature(&w.with_id(&u.utterance_id), cfg))
                                .map_err(|e| e.for_utterance(&u.utterance_id))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::BadConfig("extraction worker panicked".into()))))
            .collect()
    });

    let mut features = Vec::with_capacity(utterances.len());
    for part in results {
        features.extend(part?);
    }
    Ok(FeatureTable {
        k: cfg.lld.k(),
        features,
    })
}
