//! Spontaneity-aware speech emotion recognition.
//!
//! The crate covers the full classical pipeline:
//!
//! - [`audio`]: WAV decoding, corpus manifests and framing
//! - [`lld`]: per-frame MFCC, zero-crossing rate, voicing probability and F0
//! - [`pool`]: smoothing, deltas and twelve functionals per track, giving a
//!   `24 k`-dimensional utterance feature, plus context concatenation
//! - [`svm`]: binary soft-margin SVM, one-vs-rest, and the joint tuple
//!   classifier
//! - [`models`]: the flat baseline, the spontaneity-routed hierarchy and the
//!   joint emotion model, with a binary container format
//! - [`eval`]: splits, metrics, context sweeps, descriptor ablations and a
//!   synthetic corpus generator

pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod lld;
pub mod models;
pub mod pool;
pub mod svm;

mod codec;

pub use error::{Error, Result};
