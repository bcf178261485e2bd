//! Experiment drivers: corpus splits, accuracy reports, context-length
//! sweeps, descriptor ablations and a synthetic corpus generator.

mod experiments;
mod metrics;
mod split;
mod synth;

pub use experiments::{
    ablate_features, ablation_columns, context_sweep, spontaneity_accuracy, write_ablation_csv,
    write_sweep_csv, AblationMode, AblationRow, DescriptorGroup, SweepRow,
};
pub use metrics::{evaluate, EvalReport};
pub use split::{split_corpus, SplitSpec};
pub use synth::{gen_synth_corpus, synth_waveform, SynthCorpus, SynthSpec, ToneBand};
