//! Audio ingestion: 16-bit PCM WAV decoding, corpus manifests and framing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Decoded mono PCM audio for one utterance, amplitudes in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
    utterance_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32, utterance_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::BadConfig("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::BadConfig("waveform has no samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::BadConfig(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate,
            utterance_id: utterance_id.into(),
        })
    }

    pub fn with_id(self, utterance_id: impl Into<String>) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            ..self
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::MalformedWav("truncated data".into())
        }
        hound::Error::IoError(e) => Error::MalformedWav(e.to_string()),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedFormat("encoding".into()),
        hound::Error::TooWide => Error::UnsupportedFormat("sample width".into()),
        hound::Error::InvalidSampleFormat => Error::UnsupportedFormat("sample format".into()),
        other => Error::MalformedWav(other.to_string()),
    }
}

/// Load a RIFF/WAVE file holding 16-bit mono PCM.
///
/// Samples are scaled by 1/32768, so -32768 maps to exactly -1.0.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!("channels={}", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedFormat("format=float".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "bits_per_sample={}",
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    if samples.is_empty() {
        return Err(Error::MalformedWav("no sample data".into()));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Waveform::new(samples, spec.sample_rate, id)
}

/// Write a waveform as 16-bit mono PCM. Values are rounded to the nearest
/// quantization step and clipped to the int16 range.
pub fn write_wav(wave: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Serialization(other.to_string()),
    })?;
    for &s in &wave.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Serialization(e.to_string()))
}

/// Binary spontaneity label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spontaneity {
    Scripted = 0,
    Spontaneous = 1,
}

impl Spontaneity {
    pub const ALL: [Spontaneity; 2] = [Spontaneity::Scripted, Spontaneity::Spontaneous];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Spontaneity::Scripted),
            1 => Some(Spontaneity::Spontaneous),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Spontaneity::Scripted => "scripted",
            Spontaneity::Spontaneous => "spontaneous",
        }
    }
}

/// Four-way emotion label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Anger = 0,
    Joy = 1,
    Neutral = 2,
    Sadness = 3,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Anger, Emotion::Joy, Emotion::Neutral, Emotion::Sadness];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Emotion::Anger => "anger",
            Emotion::Joy => "joy",
            Emotion::Neutral => "neutral",
            Emotion::Sadness => "sadness",
        };
        f.write_str(name)
    }
}

/// One labelled manifest row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub utterance_id: String,
    pub wav_path: PathBuf,
    pub session_id: String,
    pub dialog_id: String,
    pub speaker_id: String,
    pub spontaneity: Spontaneity,
    pub emotion: Emotion,
}

pub const MANIFEST_HEADER: [&str; 7] = [
    "utterance_id",
    "wav_path",
    "session_id",
    "dialog_id",
    "speaker_id",
    "spontaneity",
    "emotion",
];

/// Utterances grouped by dialog, in recording order within each dialog.
///
/// Dialogs keep the order in which they first appear. Every dialog carries a
/// single spontaneity label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
    dialogs: Vec<Range<usize>>,
    root: PathBuf,
}

impl Corpus {
    /// Group and validate utterances. Relative WAV paths resolve against `root`.
    pub fn new(utterances: Vec<Utterance>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, u) in utterances.iter().enumerate() {
            if !seen.insert(u.utterance_id.as_str()) {
                return Err(Error::Manifest {
                    row: i + 2,
                    message: format!("duplicate utterance_id {}", u.utterance_id),
                });
            }
        }

        // dialog order of first appearance, member indices in file order
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, u) in utterances.iter().enumerate() {
            let d = *lookup.entry(u.dialog_id.as_str()).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[d].push(i);
        }

        for group in &members {
            let first = utterances[group[0]].spontaneity;
            if group.iter().any(|&i| utterances[i].spontaneity != first) {
                return Err(Error::InconsistentDialog {
                    dialog_id: utterances[group[0]].dialog_id.clone(),
                });
            }
        }

        let mut slots: Vec<Option<Utterance>> = utterances.into_iter().map(Some).collect();
        let mut grouped = Vec::with_capacity(slots.len());
        let mut dialogs = Vec::with_capacity(members.len());
        for group in &members {
            let start = grouped.len();
            grouped.extend(group.iter().filter_map(|&i| slots[i].take()));
            dialogs.push(start..grouped.len());
        }

        Ok(Self {
            utterances: grouped,
            dialogs,
            root: root.into(),
        })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Index ranges into [`Corpus::utterances`], one per dialog.
    pub fn dialog_ranges(&self) -> &[Range<usize>] {
        &self.dialogs
    }

    pub fn dialogs(&self) -> impl Iterator<Item = &[Utterance]> {
        self.dialogs.iter().map(|r| &self.utterances[r.clone()])
    }

    pub fn n_dialogs(&self) -> usize {
        self.dialogs.len()
    }

    /// For each utterance, its (dialog index, position within dialog).
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.utterances.len()];
        for (d, r) in self.dialogs.iter().enumerate() {
            for (p, i) in r.clone().enumerate() {
                out[i] = (d, p);
            }
        }
        out
    }

    pub fn wav_path(&self, utterance: &Utterance) -> PathBuf {
        if utterance.wav_path.is_absolute() {
            utterance.wav_path.clone()
        } else {
            self.root.join(&utterance.wav_path)
        }
    }

    /// A new corpus holding the selected dialogs, in the given order.
    pub fn select_dialogs(&self, dialog_indices: &[usize]) -> Corpus {
        let mut utterances = Vec::new();
        let mut dialogs = Vec::new();
        for &d in dialog_indices {
            let start = utterances.len();
            utterances.extend_from_slice(&self.utterances[self.dialogs[d].clone()]);
            dialogs.push(start..utterances.len());
        }
        Corpus {
            utterances,
            dialogs,
            root: self.root.clone(),
        }
    }
}

fn parse_label(raw: &str, max: usize, name: &str, row: usize) -> Result<usize> {
    let value: usize = raw.trim().parse().map_err(|_| Error::Manifest {
        row,
        message: format!("{name} is not an integer: {raw:?}"),
    })?;
    if value > max {
        return Err(Error::Manifest {
            row,
            message: format!("{name} out of range"),
        });
    }
    Ok(value)
}

/// Parse a manifest CSV. Row numbers in errors count the header as row 1.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    read_manifest(file, root)
}

/// Parse manifest CSV from any reader.
pub fn read_manifest(reader: impl std::io::Read, root: impl Into<PathBuf>) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Manifest {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Manifest {
                row: 1,
                message: format!("missing column {name}"),
            })?;
    }

    let mut utterances = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Manifest {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str> {
            let idx = columns[c];
            record.get(idx).ok_or_else(|| Error::Manifest {
                row,
                message: format!("missing column {}", MANIFEST_HEADER[c]),
            })
        };
        let spontaneity = parse_label(field(5)?, 1, "spontaneity", row)?;
        let emotion = parse_label(field(6)?, 3, "emotion", row)?;
        let utterance_id = field(0)?.to_string();
        if utterance_id.is_empty() {
            return Err(Error::Manifest {
                row,
                message: "empty utterance_id".into(),
            });
        }
        utterances.push(Utterance {
            utterance_id,
            wav_path: PathBuf::from(field(1)?),
            session_id: field(2)?.to_string(),
            dialog_id: field(3)?.to_string(),
            speaker_id: field(4)?.to_string(),
            spontaneity: Spontaneity::from_index(spontaneity).expect("range checked"),
            emotion: Emotion::from_index(emotion).expect("range checked"),
        });
    }
    Corpus::new(utterances, root)
}

/// Serialize a corpus back to manifest CSV, dialogs in corpus order.
pub fn write_manifest(corpus: &Corpus, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(MANIFEST_HEADER).map_err(ser)?;
    for u in corpus.utterances() {
        let path = u.wav_path.to_string_lossy();
        let s = u.spontaneity.index().to_string();
        let e = u.emotion.index().to_string();
        w.write_record([
            u.utterance_id.as_str(),
            path.as_ref(),
            u.session_id.as_str(),
            u.dialog_id.as_str(),
            u.speaker_id.as_str(),
            s.as_str(),
            e.as_str(),
        ])
        .map_err(ser)?;
    }
    w.flush()
        .map_err(|e| Error::Serialization(e.to_string()))
}

/// Window length and stride, in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FramingConfig {
    pub window_ms: f64,
    pub stride_ms: f64,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            stride_ms: 10.0,
        }
    }
}

impl FramingConfig {
    /// (window, stride) in samples at `sample_rate`.
    pub fn to_samples(&self, sample_rate: u32) -> Result<(usize, usize)> {
        if !(self.window_ms > 0.0) || !(self.stride_ms > 0.0) {
            return Err(Error::BadConfig(format!(
                "window_ms={} stride_ms={} must be positive",
                self.window_ms, self.stride_ms
            )));
        }
        let rate = f64::from(sample_rate);
        let w = (self.window_ms * rate / 1000.0).round() as usize;
        let m = (self.stride_ms * rate / 1000.0).round() as usize;
        if w == 0 || m == 0 {
            return Err(Error::BadConfig("framing rounds to zero samples".into()));
        }
        Ok((w, m))
    }
}

/// Overlapping analysis frames stored row-major (T x w).
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    data: Vec<f64>,
    window_len: usize,
    stride: usize,
    sample_rate: u32,
}

impl FrameSequence {
    pub fn from_frames(frames: &[Vec<f64>], sample_rate: u32) -> Result<Self> {
        let window_len = frames.first().map(Vec::len).unwrap_or(0);
        if window_len == 0 {
            return Err(Error::BadConfig("frame sequence needs nonempty frames".into()));
        }
        if let Some(f) = frames.iter().find(|f| f.len() != window_len) {
            return Err(Error::DimensionMismatch {
                expected: window_len,
                found: f.len(),
            });
        }
        Ok(Self {
            data: frames.concat(),
            window_len,
            stride: window_len,
            sample_rate,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.window_len
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.window_len..(t + 1) * self.window_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.window_len)
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// Slice a waveform into frames of `w` samples every `m` samples.
///
/// Trailing samples that do not fill a window are dropped; a signal shorter
/// than one window yields a single zero-padded frame.
pub fn frame_signal(wave: &Waveform, w: usize, m: usize) -> Result<FrameSequence> {
    if w == 0 || m == 0 {
        return Err(Error::BadConfig(format!("window {w} and stride {m} must be positive")));
    }
    let x = wave.samples();
    let data = if x.len() < w {
        let mut frame = x.to_vec();
        frame.resize(w, 0.0);
        frame
    } else {
        let n = (x.len() - w) / m + 1;
        let mut data = Vec::with_capacity(n * w);
        for t in 0..n {
            data.extend_from_slice(&x[t * m..t * m + w]);
        }
        data
    };
    Ok(FrameSequence {
        data,
        window_len: w,
        stride: m,
        sample_rate: wave.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize) -> Waveform {
        let s = (0..n).map(|i| (i as f64 / n as f64) * 0.5).collect();
        Waveform::new(s, 16000, "u").unwrap()
    }

    #[test]
    fn frame_counts() {
        assert_eq!(frame_signal(&wave(400), 400, 160).unwrap().n_frames(), 1);
        let f = frame_signal(&wave(720), 400, 160).unwrap();
        assert_eq!(f.n_frames(), 3);
        let w = wave(720);
        for (t, start) in [0usize, 160, 320].into_iter().enumerate() {
            assert_eq!(f.frame(t), &w.samples()[start..start + 400]);
        }
    }

    #[test]
    fn short_signal_is_zero_padded() {
        let w = wave(100);
        let f = frame_signal(&w, 400, 160).unwrap();
        assert_eq!(f.n_frames(), 1);
        assert_eq!(&f.frame(0)[..100], w.samples());
        assert!(f.frame(0)[100..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_window_or_stride_rejected() {
        assert!(matches!(frame_signal(&wave(10), 0, 1), Err(Error::BadConfig(_))));
        assert!(matches!(frame_signal(&wave(10), 4, 0), Err(Error::BadConfig(_))));
    }

    #[test]
    fn stride_equal_to_window_tiles_prefix() {
        let w = wave(1000);
        let f = frame_signal(&w, 64, 64).unwrap();
        let joined: Vec<f64> = f.iter().flatten().copied().collect();
        assert_eq!(joined.as_slice(), &w.samples()[..joined.len()]);
    }

    #[test]
    fn waveform_invariants() {
        assert!(Waveform::new(vec![], 16000, "x").is_err());
        assert!(Waveform::new(vec![0.0], 0, "x").is_err());
        assert!(Waveform::new(vec![1.5], 16000, "x").is_err());
    }

    #[test]
    fn default_framing_is_25_10_ms() {
        assert_eq!(FramingConfig::default().to_samples(16000).unwrap(), (400, 160));
    }

    const MANIFEST: &str = "utterance_id,wav_path,session_id,dialog_id,speaker_id,spontaneity,emotion\n\
        a,a.wav,S1,D1,F,1,0\n\
        b,b.wav,S1,D1,M,1,3\n";

    #[test]
    fn manifest_passes_rows_through() {
        let c = read_manifest(MANIFEST.as_bytes(), "/data").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.utterances()[0].utterance_id, "a");
        assert_eq!(c.utterances()[1].emotion, Emotion::Sadness);
        assert_eq!(c.n_dialogs(), 1);
        assert_eq!(c.wav_path(&c.utterances()[0]), PathBuf::from("/data/a.wav"));
    }

    #[test]
    fn manifest_rejects_bad_rows() {
        let bad = MANIFEST.replace("b,b.wav,S1,D1,M,1,3", "b,b.wav,S1,D1,M,1,7");
        match read_manifest(bad.as_bytes(), "") {
            Err(Error::Manifest { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("emotion out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mixed = MANIFEST.replace("b,b.wav,S1,D1,M,1,3", "b,b.wav,S1,D1,M,0,3");
        assert!(matches!(
            read_manifest(mixed.as_bytes(), ""),
            Err(Error::InconsistentDialog { .. })
        ));

        let dup = MANIFEST.replace("b,b.wav", "a,b.wav");
        assert!(matches!(read_manifest(dup.as_bytes(), ""), Err(Error::Manifest { row: 3, .. })));

        let missing = "utterance_id,wav_path,session_id,dialog_id,speaker_id,emotion\n";
        match read_manifest(missing.as_bytes(), "") {
            Err(Error::Manifest { row: 1, message }) => assert!(message.contains("spontaneity")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_groups_interleaved_dialogs() {
        let text = "utterance_id,wav_path,session_id,dialog_id,speaker_id,spontaneity,emotion\n\
            a,a.wav,S1,D1,F,1,0\n\
            x,x.wav,S1,D2,F,0,1\n\
            b,b.wav,S1,D1,M,1,3\n";
        let c = read_manifest(text.as_bytes(), "").unwrap();
        let ids: Vec<_> = c.utterances().iter().map(|u| u.utterance_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "x"]);
        assert_eq!(c.dialog_ranges(), &[0..2, 2..3]);
        assert_eq!(c.positions(), vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn manifest_reserializes_identically() {
        let c = read_manifest(MANIFEST.as_bytes(), "").unwrap();
        let mut out = Vec::new();
        write_manifest(&c, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), MANIFEST);
    }
}
