//! Classifier compositions: the flat emotion baseline, the hierarchical
//! spontaneity-then-emotion router, and the joint tuple model.
//!
//! Every composition z-scores its inputs with statistics fitted on its own
//! training data; the fitted scalers are part of the model.

use std::ops::Range;
use std::path::Path;

use crate::audio::{Corpus, Emotion, Spontaneity};
use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::pool::{context_vector, FeatureTable};
use crate::svm::{
    row_tuple, train_binary, train_joint, train_multiclass_ovr, BinarySvm, ClassScorer,
    JointModel, KernelKind, KernelSpec, OvrModel, Standardizer, TrainConfig,
};

pub const MAGIC: &[u8; 4] = b"SESM";
pub const FORMAT_VERSION: u32 = 1;

/// Default context length of the spontaneity classifier.
pub const DEFAULT_SPONT_ELL: usize = 10;

/// Utterance features aligned with their labels and dialog structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub emotion: Vec<Emotion>,
    pub spontaneity: Vec<Spontaneity>,
    pub dialogs: Vec<Range<usize>>,
}

impl Dataset {
    /// Pair every corpus utterance with its cached feature.
    pub fn from_corpus(corpus: &Corpus, table: &FeatureTable) -> Result<Self> {
        let lookup: std::collections::HashMap<&str, &[f64]> = table
            .features
            .iter()
            .map(|f| (f.utterance_id.as_str(), f.values.as_slice()))
            .collect();
        let mut features = Vec::with_capacity(corpus.len());
        for u in corpus.utterances() {
            let f = lookup.get(u.utterance_id.as_str()).ok_or_else(|| {
                Error::Serialization(format!("no cached feature for utterance {}", u.utterance_id))
            })?;
            features.push(f.to_vec());
        }
        Ok(Self {
            ids: corpus.utterances().iter().map(|u| u.utterance_id.clone()).collect(),
            features,
            emotion: corpus.utterances().iter().map(|u| u.emotion).collect(),
            spontaneity: corpus.utterances().iter().map(|u| u.spontaneity).collect(),
            dialogs: corpus.dialog_ranges().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map(Vec::len).unwrap_or(0)
    }

    pub fn dialog_features(&self, dialog: usize) -> Vec<&[f64]> {
        self.features[self.dialogs[dialog].clone()]
            .iter()
            .map(Vec::as_slice)
            .collect()
    }

    /// Context vector of length `dim * ell` for every utterance, in order.
    pub fn context_features(&self, ell: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.len());
        for d in 0..self.dialogs.len() {
            let rows = self.dialog_features(d);
            for anchor in 0..rows.len() {
                out.push(context_vector(&rows, anchor, ell)?);
            }
        }
        Ok(out)
    }

    /// Keep only the given columns of every feature.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            features: self
                .features
                .iter()
                .map(|f| columns.iter().map(|&c| f[c]).collect())
                .collect(),
            ..self.clone()
        }
    }

    fn rows_where(&self, pred: impl Fn(usize) -> bool) -> (Vec<Vec<f64>>, Vec<usize>) {
        (0..self.len())
            .filter(|&i| pred(i))
            .map(|i| (self.features[i].clone(), self.emotion[i].index()))
            .unzip()
    }
}

/// One-vs-rest emotion classifier on standardized inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EmotionClassifier {
    pub scaler: Standardizer,
    pub ovr: OvrModel,
}

impl EmotionClassifier {
    pub fn train(x: &[Vec<f64>], y: &[usize], cfg: &TrainConfig) -> Result<Self> {
        let scaler = Standardizer::fit(x)?;
        let z = scaler.transform_all(x)?;
        let ovr = train_multiclass_ovr(&z, y, Emotion::COUNT, cfg)?;
        Ok(Self { scaler, ovr })
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.ovr.margins(&self.scaler.transform(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Emotion> {
        let z = self.scaler.transform(x)?;
        let c = self.ovr.predict(&z)?;
        Ok(Emotion::from_index(c).expect("four emotion scorers"))
    }
}

/// Binary spontaneity classifier on standardized context vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpontaneityClassifier {
    pub scaler: Standardizer,
    pub svm: BinarySvm,
    pub ell: usize,
}

impl SpontaneityClassifier {
    /// Train on the context features of every utterance in `data`.
    pub fn train(data: &Dataset, ell: usize, cfg: &TrainConfig) -> Result<Self> {
        let x = data.context_features(ell)?;
        let y: Vec<i8> = data
            .spontaneity
            .iter()
            .map(|s| match s {
                Spontaneity::Spontaneous => 1,
                Spontaneity::Scripted => -1,
            })
            .collect();
        let scaler = Standardizer::fit(&x)?;
        let svm = train_binary(&scaler.transform_all(&x)?, &y, cfg)?;
        Ok(Self { scaler, svm, ell })
    }

    /// Decision and margin for the context ending at `anchor`.
    pub fn decide(&self, dialog: &[&[f64]], anchor: usize) -> Result<(Spontaneity, f64)> {
        let ctx = context_vector(dialog, anchor, self.ell)?;
        let (label, margin) = self.svm.predict(&self.scaler.transform(&ctx)?)?;
        let s = if label > 0 {
            Spontaneity::Spontaneous
        } else {
            Spontaneity::Scripted
        };
        Ok((s, margin))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub config: TrainConfig,
    pub emotion: EmotionClassifier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalModel {
    pub config: TrainConfig,
    pub spontaneity: SpontaneityClassifier,
    pub scripted: EmotionClassifier,
    pub spontaneous: EmotionClassifier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointEmotionModel {
    pub config: TrainConfig,
    pub scaler: Standardizer,
    pub joint: JointModel,
}

/// Output of a composed model for one utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub emotion: Emotion,
    /// Absent for the baseline, which ignores spontaneity.
    pub spontaneity: Option<Spontaneity>,
}

pub fn train_baseline(data: &Dataset, cfg: &TrainConfig) -> Result<BaselineModel> {
    let (x, y) = data.rows_where(|_| true);
    Ok(BaselineModel {
        config: *cfg,
        emotion: EmotionClassifier::train(&x, &y, cfg)?,
    })
}

impl BaselineModel {
    pub fn dim(&self) -> usize {
        self.emotion.ovr.dim
    }

    pub fn predict(&self, feature: &[f64]) -> Result<Emotion> {
        self.emotion.predict(feature)
    }
}

fn branch_data(data: &Dataset, branch: Spontaneity) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let (x, y) = data.rows_where(|i| data.spontaneity[i] == branch);
    let mut classes = y.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::MissingBranchData(branch.name().into()));
    }
    Ok((x, y))
}

/// Train the spontaneity router (context length `ell`) and one emotion
/// classifier per spontaneity branch.
pub fn train_hierarchical(data: &Dataset, cfg: &TrainConfig, ell: usize) -> Result<HierarchicalModel> {
    if ell == 0 {
        return Err(Error::BadConfig("context length must be at least 1".into()));
    }
    let (x0, y0) = branch_data(data, Spontaneity::Scripted)?;
    let (x1, y1) = branch_data(data, Spontaneity::Spontaneous)?;
    Ok(HierarchicalModel {
        config: *cfg,
        spontaneity: SpontaneityClassifier::train(data, ell, cfg)?,
        scripted: EmotionClassifier::train(&x0, &y0, cfg)?,
        spontaneous: EmotionClassifier::train(&x1, &y1, cfg)?,
    })
}

/// Result of routing one utterance through the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoutedPrediction {
    pub emotion: Emotion,
    /// Which branch scored the utterance.
    pub branch: Spontaneity,
    pub spontaneity_margin: f64,
}

impl HierarchicalModel {
    pub fn ell(&self) -> usize {
        self.spontaneity.ell
    }

    pub fn dim(&self) -> usize {
        self.scripted.ovr.dim
    }

    /// Route the anchor utterance of a dialog: decide spontaneity from the
    /// causal context window, then classify the anchor's own feature with
    /// the chosen branch.
    pub fn predict(&self, dialog: &[&[f64]], anchor: usize) -> Result<RoutedPrediction> {
        let (branch, margin) = self.spontaneity.decide(dialog, anchor)?;
        let classifier = match branch {
            Spontaneity::Spontaneous => &self.spontaneous,
            Spontaneity::Scripted => &self.scripted,
        };
        Ok(RoutedPrediction {
            emotion: classifier.predict(dialog[anchor])?,
            branch,
            spontaneity_margin: margin,
        })
    }
}

pub fn predict_hierarchical(
    model: &HierarchicalModel,
    dialog: &[&[f64]],
    anchor: usize,
) -> Result<RoutedPrediction> {
    model.predict(dialog, anchor)
}

/// Train the joint tuple classifier on utterance-level features.
pub fn train_joint_emotion(data: &Dataset, cfg: &TrainConfig) -> Result<JointEmotionModel> {
    let scaler = Standardizer::fit(&data.features)?;
    let z = scaler.transform_all(&data.features)?;
    let tuples: Vec<(usize, usize)> = data
        .spontaneity
        .iter()
        .zip(&data.emotion)
        .map(|(s, e)| (s.index(), e.index()))
        .collect();
    Ok(JointEmotionModel {
        config: *cfg,
        scaler,
        joint: train_joint(&z, &tuples, cfg)?,
    })
}

impl JointEmotionModel {
    pub fn dim(&self) -> usize {
        self.joint.dim()
    }

    pub fn predict(&self, feature: &[f64]) -> Result<(Emotion, Spontaneity)> {
        let row = self.joint.predict_row(&self.scaler.transform(feature)?)?;
        let (s, e) = row_tuple(row);
        Ok((
            Emotion::from_index(e).expect("tuple row in range"),
            Spontaneity::from_index(s).expect("tuple row in range"),
        ))
    }
}

pub fn predict_joint_emotion(model: &JointEmotionModel, feature: &[f64]) -> Result<(Emotion, Spontaneity)> {
    model.predict(feature)
}

/// Any trained composition.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Baseline(BaselineModel),
    Hierarchical(HierarchicalModel),
    Joint(JointEmotionModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Baseline(_) => "baseline",
            Model::Hierarchical(_) => "hierarchical",
            Model::Joint(_) => "joint",
        }
    }

    pub fn config(&self) -> &TrainConfig {
        match self {
            Model::Baseline(m) => &m.config,
            Model::Hierarchical(m) => &m.config,
            Model::Joint(m) => &m.config,
        }
    }

    /// Utterance feature dimension the model expects.
    pub fn dim(&self) -> usize {
        match self {
            Model::Baseline(m) => m.dim(),
            Model::Hierarchical(m) => m.dim(),
            Model::Joint(m) => m.dim(),
        }
    }

    /// Predict every utterance of a dataset, in order.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Prediction>> {
        if data.dim() != self.dim() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.dim(),
            });
        }
        let mut out = Vec::with_capacity(data.len());
        for d in 0..data.dialogs.len() {
            let rows = data.dialog_features(d);
            for anchor in 0..rows.len() {
                let p = match self {
                    Model::Baseline(m) => Prediction {
                        emotion: m.predict(rows[anchor])?,
                        spontaneity: None,
                    },
                    Model::Hierarchical(m) => {
                        let r = m.predict(&rows, anchor)?;
                        Prediction {
                            emotion: r.emotion,
                            spontaneity: Some(r.branch),
                        }
                    }
                    Model::Joint(m) => {
                        let (e, s) = m.predict(rows[anchor])?;
                        Prediction {
                            emotion: e,
                            spontaneity: Some(s),
                        }
                    }
                };
                out.push(p);
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::default();
        enc.buf.extend_from_slice(MAGIC);
        enc.u32(FORMAT_VERSION);
        let kind = self.kind().as_bytes();
        enc.u8(kind.len() as u8);
        enc.buf.extend_from_slice(kind);
        encode_config(&mut enc, self.config());
        enc.usize(self.dim());
        match self {
            Model::Baseline(m) => encode_emotion(&mut enc, &m.emotion),
            Model::Hierarchical(m) => {
                enc.usize(m.spontaneity.ell);
                encode_scaler(&mut enc, &m.spontaneity.scaler);
                encode_binary(&mut enc, &m.spontaneity.svm);
                encode_emotion(&mut enc, &m.scripted);
                encode_emotion(&mut enc, &m.spontaneous);
            }
            Model::Joint(m) => {
                encode_scaler(&mut enc, &m.scaler);
                enc.f64(m.joint.c);
                enc.f64(m.joint.final_loss);
                enc.usize(m.joint.epochs);
                enc.f64s(&m.joint.loss_history);
                enc.matrix(&m.joint.weights);
            }
        }
        let crc = crc32fast::hash(&enc.buf);
        enc.u32(crc);
        enc.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::CorruptFile("file shorter than its header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Serialization("missing SESM magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if bytes.len() < 12 {
            return Err(Error::CorruptFile("missing checksum".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::CorruptFile("checksum mismatch".into()));
        }

        let mut dec = Decoder::new(&body[8..]);
        let kind_len = dec.u8()? as usize;
        let kind: Vec<u8> = (0..kind_len).map(|_| dec.u8()).collect::<Result<_>>()?;
        let config = decode_config(&mut dec)?;
        let dim = dec.usize()?;
        let model = match kind.as_slice() {
            b"baseline" => Model::Baseline(BaselineModel {
                config,
                emotion: decode_emotion(&mut dec)?,
            }),
            b"hierarchical" => {
                let ell = dec.usize()?;
                let scaler = decode_scaler(&mut dec)?;
                let svm = decode_binary(&mut dec)?;
                Model::Hierarchical(HierarchicalModel {
                    config,
                    spontaneity: SpontaneityClassifier { scaler, svm, ell },
                    scripted: decode_emotion(&mut dec)?,
                    spontaneous: decode_emotion(&mut dec)?,
                })
            }
            b"joint" => {
                let scaler = decode_scaler(&mut dec)?;
                let c = dec.f64()?;
                let final_loss = dec.f64()?;
                let epochs = dec.usize()?;
                let loss_history = dec.f64s()?;
                let weights = dec.matrix()?;
                let mut joint = JointModel::from_weights(weights, c)
                    .map_err(|e| Error::Serialization(e.to_string()))?;
                joint.final_loss = final_loss;
                joint.epochs = epochs;
                joint.loss_history = loss_history;
                Model::Joint(JointEmotionModel { config, scaler, joint })
            }
            other => {
                return Err(Error::Serialization(format!(
                    "unknown model kind {:?}",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        if dec.remaining() != 0 {
            return Err(Error::Serialization(format!("{} trailing bytes", dec.remaining())));
        }
        if model.dim() != dim {
            return Err(Error::Serialization(format!(
                "header dimension {dim} disagrees with model dimension {}",
                model.dim()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Model::load(path)
}

fn encode_config(enc: &mut Encoder, cfg: &TrainConfig) {
    enc.f64(cfg.c);
    enc.u8(match cfg.kernel {
        KernelKind::Linear => 0,
        KernelKind::Rbf => 1,
    });
    match cfg.gamma {
        Some(g) => {
            enc.u8(1);
            enc.f64(g);
        }
        None => {
            enc.u8(0);
            enc.f64(0.0);
        }
    }
    enc.f64(cfg.tolerance);
    enc.usize(cfg.max_passes);
    enc.u64(cfg.seed);
}

fn decode_config(dec: &mut Decoder) -> Result<TrainConfig> {
    let c = dec.f64()?;
    let kernel = match dec.u8()? {
        0 => KernelKind::Linear,
        1 => KernelKind::Rbf,
        t => return Err(Error::Serialization(format!("unknown kernel tag {t}"))),
    };
    let has_gamma = dec.u8()? != 0;
    let gamma = dec.f64()?;
    Ok(TrainConfig {
        c,
        kernel,
        gamma: has_gamma.then_some(gamma),
        tolerance: dec.f64()?,
        max_passes: dec.usize()?,
        seed: dec.u64()?,
    })
}

fn encode_scaler(enc: &mut Encoder, s: &Standardizer) {
    enc.f64s(&s.mean);
    enc.f64s(&s.scale);
}

fn decode_scaler(dec: &mut Decoder) -> Result<Standardizer> {
    let mean = dec.f64s()?;
    let scale = dec.f64s()?;
    if mean.len() != scale.len() {
        return Err(Error::Serialization("scaler mean/scale lengths differ".into()));
    }
    Ok(Standardizer { mean, scale })
}

fn encode_binary(enc: &mut Encoder, m: &BinarySvm) {
    match m.kernel {
        KernelSpec::Linear => {
            enc.u8(0);
            enc.f64(0.0);
        }
        KernelSpec::Rbf { gamma } => {
            enc.u8(1);
            enc.f64(gamma);
        }
    }
    enc.f64(m.bias);
    enc.matrix(&m.support_vectors);
    enc.f64s(&m.dual_coef);
}

fn decode_binary(dec: &mut Decoder) -> Result<BinarySvm> {
    let tag = dec.u8()?;
    let gamma = dec.f64()?;
    let kernel = match tag {
        0 => KernelSpec::Linear,
        1 => KernelSpec::Rbf { gamma },
        t => return Err(Error::Serialization(format!("unknown kernel tag {t}"))),
    };
    let bias = dec.f64()?;
    let support_vectors = dec.matrix()?;
    let dual_coef = dec.f64s()?;
    if dual_coef.len() != support_vectors.len() {
        return Err(Error::Serialization("support vector / coefficient count mismatch".into()));
    }
    Ok(BinarySvm {
        kernel,
        support_vectors,
        dual_coef,
        bias,
    })
}

fn encode_emotion(enc: &mut Encoder, m: &EmotionClassifier) {
    encode_scaler(enc, &m.scaler);
    enc.usize(m.ovr.dim);
    enc.usize(m.ovr.scorers.len());
    for s in &m.ovr.scorers {
        match s {
            ClassScorer::Trained(b) => {
                enc.u8(1);
                encode_binary(enc, b);
            }
            ClassScorer::Absent => enc.u8(0),
        }
    }
}

fn decode_emotion(dec: &mut Decoder) -> Result<EmotionClassifier> {
    let scaler = decode_scaler(dec)?;
    let dim = dec.usize()?;
    let n = dec.usize()?;
    if n != Emotion::COUNT {
        return Err(Error::Serialization(format!("expected 4 emotion scorers, found {n}")));
    }
    let scorers = (0..n)
        .map(|_| match dec.u8()? {
            1 => decode_binary(dec).map(ClassScorer::Trained),
            0 => Ok(ClassScorer::Absent),
            t => Err(Error::Serialization(format!("unknown scorer tag {t}"))),
        })
        .collect::<Result<_>>()?;
    Ok(EmotionClassifier {
        scaler,
        ovr: OvrModel { scorers, dim },
    })
}
