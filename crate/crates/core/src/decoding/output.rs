use serde::{Deserialize, Serialize};

use super::BeamHypothesis;
use crate::reaction::Vocabulary;
use crate::smiles::canonicalize;

/// A decoded sequence turned back into text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Postprocessed {
    /// Concatenated tokens as produced.
    pub raw: String,
    /// Whether `raw` parsed and passed valence checks.
    pub grammatical: bool,
    /// The canonical form if grammatical, else `raw`.
    pub text: String,
}

/// Detokenizes `hypothesis` and canonicalizes it when possible. Truncated
/// hypotheses and those containing special tokens are never grammatical.
pub fn postprocess_prediction(hypothesis: &BeamHypothesis, vocab: &Vocabulary) -> Postprocessed {
    let mut special = false;
    let raw: String = hypothesis
        .content()
        .iter()
        .map(|&id| match vocab.lookup(id) {
            Some(t) if !Vocabulary::is_special(id) => t,
            _ => {
                special = true;
                ""
            }
        })
        .collect();
    let canonical = (hypothesis.finished && !special).then(|| canonicalize(&raw).ok()).flatten();
    match canonical {
        Some(text) => Postprocessed { raw, grammatical: true, text },
        None => Postprocessed { text: raw.clone(), raw, grammatical: false },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub smiles: String,
    pub probability: f64,
}

/// Ranked predictions for one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub source: Vec<String>,
    /// Sorted by probability, most probable first.
    pub candidates: Vec<Candidate>,
    /// Probability of the rank-1 candidate.
    pub top1_confidence: f64,
    /// 1-based rank of the first correct candidate, once labelled.
    pub correct_at: Option<usize>,
    /// Whether the rank-1 candidate is a valid molecule.
    pub grammatical: bool,
}

impl PredictionRecord {
    pub fn from_beam(source: Vec<String>, beam: &[BeamHypothesis], vocab: &Vocabulary) -> Self {
        let processed: Vec<Postprocessed> = beam.iter().map(|h| postprocess_prediction(h, vocab)).collect();
        let candidates: Vec<Candidate> =
            processed.iter().zip(beam).map(|(p, h)| Candidate { smiles: p.text.clone(), probability: h.probability() }).collect();
        PredictionRecord {
            source,
            top1_confidence: candidates.first().map_or(0.0, |c| c.probability),
            grammatical: processed.first().is_some_and(|p| p.grammatical),
            candidates,
            correct_at: None,
        }
    }

    /// Rebuilds a record from a predictions-file line; grammaticality is
    /// recomputed from the rank-1 string.
    pub fn from_line(line: &str) -> Result<Self, String> {
        let candidates = parse_prediction_line(line)?;
        Ok(PredictionRecord {
            source: Vec::new(),
            top1_confidence: candidates.first().map_or(0.0, |c| c.probability),
            grammatical: candidates.first().is_some_and(|c| canonicalize(&c.smiles).is_ok()),
            candidates,
            correct_at: None,
        })
    }

    pub fn is_correct(&self) -> bool {
        self.correct_at == Some(1)
    }

    /// One predictions-file line: `smiles<TAB>prob` pairs joined by `|`.
    pub fn to_line(&self) -> String {
        format_prediction_line(&self.candidates)
    }
}

pub fn format_prediction_line(candidates: &[Candidate]) -> String {
    candidates.iter().map(|c| format!("{}\t{}", c.smiles, c.probability)).collect::<Vec<_>>().join("|")
}

pub fn parse_prediction_line(line: &str) -> Result<Vec<Candidate>, String> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split('|')
        .map(|pair| {
            let (smiles, p) = pair.rsplit_once('\t').ok_or_else(|| format!("missing tab in {pair:?}"))?;
            let probability = p.parse::<f64>().map_err(|e| format!("bad probability {p:?}: {e}"))?;
            Ok(Candidate { smiles: smiles.to_string(), probability })
        })
        .collect()
}

/// One point of the coverage/accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Fraction of records with confidence ≥ threshold.
    pub coverage: f64,
    /// Top-1 accuracy among the covered records; 0 when none are covered.
    pub accuracy: f64,
}

/// Thresholds 0, 0.01, …, 1.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Coverage and accuracy of the rank-1 predictions whose confidence
/// reaches each threshold. Records must be labelled.
pub fn confidence_curve(records: &[PredictionRecord], thresholds: &[f64]) -> Vec<CurvePoint> {
    thresholds
        .iter()
        .map(|&threshold| {
            let (covered, correct) = records
                .iter()
                .filter(|r| r.top1_confidence >= threshold)
                .fold((0usize, 0usize), |(n, c), r| (n + 1, c + usize::from(r.is_correct())));
            CurvePoint {
                threshold,
                coverage: if records.is_empty() { 0.0 } else { covered as f64 / records.len() as f64 },
                accuracy: if covered == 0 { 0.0 } else { correct as f64 / covered as f64 },
            }
        })
        .collect()
}

pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,coverage,accuracy\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.coverage, p.accuracy));
    }
    out
}

/// Attention weights of one decoded example: rows are target steps,
/// columns source positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionDocument {
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub example_id: usize,
}

/// Pairs the recorded attention of `hypothesis` with token strings. The
/// target side includes the closing `</s>` when it was produced. Returns
/// `None` if no attention was recorded.
pub fn export_attention(hypothesis: &BeamHypothesis, source_tokens: &[String], vocab: &Vocabulary, example_id: usize) -> Option<AttentionDocument> {
    let rows = hypothesis.attention_rows.as_ref()?;
    let target_tokens = hypothesis
        .token_ids
        .iter()
        .map(|&id| vocab.lookup(id).unwrap_or("<unk>").to_string())
        .collect();
    Some(AttentionDocument { source_tokens: source_tokens.to_vec(), target_tokens, matrix: rows.clone(), example_id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::EOS;
    use crate::smiles::tokenize;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["C", "O", "(", ")", "c", "1"])
    }

    fn hyp(v: &Vocabulary, smiles: &str) -> BeamHypothesis {
        let mut token_ids: Vec<u32> = tokenize(smiles).unwrap().iter().map(|t| v.id(t.as_str()).unwrap()).collect();
        token_ids.push(EOS);
        BeamHypothesis { token_ids, log_prob: -0.5, finished: true, attention_rows: None }
    }

    #[test]
    fn canonicalizes_valid_output() {
        let v = vocab();
        let p = postprocess_prediction(&hyp(&v, "OCC"), &v);
        assert_eq!(p, Postprocessed { raw: "OCC".into(), grammatical: true, text: canonicalize("CCO").unwrap() });
        let p = postprocess_prediction(&hyp(&v, "C"), &v);
        assert_eq!((p.text.as_str(), p.grammatical), ("C", true));
    }

    #[test]
    fn ungrammatical_output_stays_raw() {
        let v = vocab();
        let p = postprocess_prediction(&hyp(&v, "C("), &v);
        assert_eq!(p, Postprocessed { raw: "C(".into(), grammatical: false, text: "C(".into() });
        let mut truncated = hyp(&v, "CCO");
        truncated.token_ids.pop();
        truncated.finished = false;
        assert!(!postprocess_prediction(&truncated, &v).grammatical);
    }

    #[test]
    fn record_and_line_round_trip() {
        let v = vocab();
        let mut second = hyp(&v, "C(");
        second.log_prob = -2.0;
        let rec = PredictionRecord::from_beam(vec!["C".into()], &[hyp(&v, "OC"), second], &v);
        assert!((rec.top1_confidence - (-0.5f64).exp()).abs() < 1e-15);
        assert!(rec.grammatical);
        let line = rec.to_line();
        assert_eq!(line.matches('|').count(), 1);
        let back = PredictionRecord::from_line(&line).unwrap();
        assert_eq!(back.candidates, rec.candidates);
        assert!(back.grammatical);
        assert!(PredictionRecord::from_line("").unwrap().candidates.is_empty());
        assert!(parse_prediction_line("CCO").is_err());
    }

    fn labelled(conf: f64, correct: bool) -> PredictionRecord {
        PredictionRecord {
            source: vec![],
            candidates: vec![Candidate { smiles: "C".into(), probability: conf }],
            top1_confidence: conf,
            correct_at: correct.then_some(1),
            grammatical: true,
        }
    }

    #[test]
    fn confidence_curve_points() {
        let recs = [labelled(0.9, true), labelled(0.4, false)];
        let c = confidence_curve(&recs, &[0.0, 0.5, 0.95]);
        assert_eq!(c[0], CurvePoint { threshold: 0.0, coverage: 1.0, accuracy: 0.5 });
        assert_eq!(c[1], CurvePoint { threshold: 0.5, coverage: 0.5, accuracy: 1.0 });
        assert_eq!(c[2], CurvePoint { threshold: 0.95, coverage: 0.0, accuracy: 0.0 });
        assert!(curve_to_csv(&c).starts_with("threshold,coverage,accuracy\n0,1,0.5\n"));
    }

    #[test]
    fn attention_document_shape() {
        let v = vocab();
        let mut h = hyp(&v, "C");
        h.attention_rows = Some(vec![vec![1.0], vec![1.0]]);
        let doc = export_attention(&h, &["C".to_string()], &v, 3).unwrap();
        assert_eq!(doc.target_tokens, vec!["C", "</s>"]);
        assert_eq!(doc.matrix, vec![vec![1.0], vec![1.0]]);
        assert!(export_attention(&hyp(&v, "C"), &[], &v, 0).is_none());
    }
}
