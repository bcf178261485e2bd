use crate::audio::{Emotion, Spontaneity, Utterance};
use crate::error::{Error, Result};

/// Accuracy summary of emotion predictions.
///
/// Per-class and per-spontaneity accuracies are `None` when the test set
/// holds no utterance of that class or spontaneity.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_class_accuracy: [Option<f64>; 4],
    pub spont_accuracy: Option<f64>,
    pub scripted_accuracy: Option<f64>,
    /// `confusion[truth][prediction]`.
    pub confusion: [[usize; 4]; 4],
    pub n_test: usize,
}

pub fn evaluate(predictions: &[Emotion], truth: &[Utterance]) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    let mut confusion = [[0usize; 4]; 4];
    let mut by_spont = [(0usize, 0usize); 2];
    for (p, u) in predictions.iter().zip(truth) {
        confusion[u.emotion.index()][p.index()] += 1;
        let slot = &mut by_spont[u.spontaneity.index()];
        slot.1 += 1;
        if *p == u.emotion {
            slot.0 += 1;
        }
    }
    let n_test = truth.len();
    let correct: usize = (0..4).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let per_class_accuracy =
        std::array::from_fn(|c| ratio(confusion[c][c], confusion[c].iter().sum()));
    let spont = by_spont[Spontaneity::Spontaneous.index()];
    let scripted = by_spont[Spontaneity::Scripted.index()];
    Ok(EvalReport {
        overall_accuracy: ratio(correct, n_test).unwrap_or(0.0),
        per_class_accuracy,
        spont_accuracy: ratio(spont.0, spont.1),
        scripted_accuracy: ratio(scripted.0, scripted.1),
        confusion,
        n_test,
    })
}

impl EvalReport {
    /// `metric,value` rows; floats with six decimals, absent values as `NA`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let mut out = String::from("metric,value\n");
        out += &format!("overall,{:.6}\n", self.overall_accuracy);
        for e in Emotion::ALL {
            out += &format!("accuracy_{e},{}\n", fmt(self.per_class_accuracy[e.index()]));
        }
        out += &format!("spontaneous,{}\n", fmt(self.spont_accuracy));
        out += &format!("scripted,{}\n", fmt(self.scripted_accuracy));
        out += &format!("n_test,{}\n", self.n_test);
        for t in Emotion::ALL {
            for p in Emotion::ALL {
                out += &format!("confusion_{t}_{p},{}\n", self.confusion[t.index()][p.index()]);
            }
        }
        w.write_all(out.as_bytes())
            .map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(emotion: usize, spont: usize) -> Utterance {
        Utterance {
            utterance_id: String::new(),
            wav_path: Default::default(),
            session_id: String::new(),
            dialog_id: String::new(),
            speaker_id: String::new(),
            spontaneity: Spontaneity::from_index(spont).unwrap(),
            emotion: Emotion::from_index(emotion).unwrap(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let truth: Vec<Utterance> = (0..8).map(|i| utt(i % 4, i % 2)).collect();
        let preds: Vec<Emotion> = truth.iter().map(|u| u.emotion).collect();
        let r = evaluate(&preds, &truth).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        assert!(r.per_class_accuracy.iter().all(|&a| a == Some(1.0)));
    }

    #[test]
    fn partial_predictions() {
        let truth = vec![utt(0, 1), utt(0, 1), utt(1, 1), utt(1, 1)];
        let preds = [Emotion::Anger, Emotion::Joy, Emotion::Joy, Emotion::Joy];
        let r = evaluate(&preds, &truth).unwrap();
        assert_eq!(r.overall_accuracy, 0.75);
        assert_eq!(r.per_class_accuracy[0], Some(0.5));
        assert_eq!(r.per_class_accuracy[1], Some(1.0));
        assert_eq!(r.per_class_accuracy[2], None);
        assert_eq!(r.scripted_accuracy, None);
        assert_eq!(r.spont_accuracy, Some(0.75));
        assert_eq!(r.confusion[0], [1, 1, 0, 0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            evaluate(&[Emotion::Joy], &[]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_marks_absent_values() {
        let truth = vec![utt(0, 1)];
        let r = evaluate(&[Emotion::Anger], &truth).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,value\noverall,1.000000\naccuracy_anger,1.000000\naccuracy_joy,NA\n"));
        assert!(text.contains("scripted,NA\n"));
    }
}
