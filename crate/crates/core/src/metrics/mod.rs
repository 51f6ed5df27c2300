//! Evaluation: full-sequence and top-k accuracy with canonicalization,
//! corpus BLEU-4 and ROUGE-L over SMILES tokens.

mod text;

pub use text::{bleu, lcs_len, rouge_l, smiles_tokens};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoding::PredictionRecord;
use crate::smiles::canonicalize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
}

fn check_len(predictions: usize, references: usize) -> Result<(), MetricsError> {
    if predictions == references {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { predictions, references })
    }
}

/// A string prepared for comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    /// Parsed and passed valence checks.
    pub valid: bool,
}

/// Canonical form when `canonical` is set and the string is a valid
/// molecule; the raw string otherwise.
pub fn normalize(smiles: &str, canonical: bool) -> Normalized {
    match canonicalize(smiles) {
        Ok(c) => Normalized { text: if canonical { c } else { smiles.to_string() }, valid: true },
        Err(_) => Normalized { text: smiles.to_string(), valid: false },
    }
}

fn is_multi_product(reference: &str) -> bool {
    reference.contains('.')
}

/// The matching rule: invalid predictions and multi-product references
/// never match; otherwise the (optionally canonicalized) strings must be
/// equal.
pub fn is_match(prediction: &str, reference: &str, canonical: bool) -> bool {
    if is_multi_product(reference) {
        return false;
    }
    let p = normalize(prediction, canonical);
    p.valid && p.text == normalize(reference, canonical).text
}

/// 1-based rank of the first candidate matching `reference`.
pub fn rank_of_match<S: AsRef<str>>(candidates: &[S], reference: &str, canonical: bool) -> Option<usize> {
    if is_multi_product(reference) {
        return None;
    }
    let r = normalize(reference, canonical).text;
    candidates.iter().position(|c| {
        let p = normalize(c.as_ref(), canonical);
        p.valid && p.text == r
    })
    .map(|i| i + 1)
}

/// Fraction of predictions matching their reference.
pub fn full_sequence_accuracy<S: AsRef<str>, R: AsRef<str>>(predictions: &[S], references: &[R], canonical: bool) -> Result<f64, MetricsError> {
    check_len(predictions.len(), references.len())?;
    let hits = predictions.iter().zip(references).filter(|(p, r)| is_match(p.as_ref(), r.as_ref(), canonical)).count();
    Ok(ratio(hits, predictions.len()))
}

/// Fraction of examples with a match among their first `k` candidates.
pub fn topk_accuracy<S: AsRef<str>, R: AsRef<str>>(beams: &[Vec<S>], references: &[R], k: usize, canonical: bool) -> Result<f64, MetricsError> {
    check_len(beams.len(), references.len())?;
    let hits = beams
        .iter()
        .zip(references)
        .filter(|(b, r)| rank_of_match(&b[..k.min(b.len())], r.as_ref(), canonical).is_some())
        .count();
    Ok(ratio(hits, beams.len()))
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Sets `correct_at` on each record from its reference.
pub fn label_records<R: AsRef<str>>(records: &mut [PredictionRecord], references: &[R], canonical: bool) -> Result<(), MetricsError> {
    check_len(records.len(), references.len())?;
    for (rec, r) in records.iter_mut().zip(references) {
        let cands: Vec<&str> = rec.candidates.iter().map(|c| c.smiles.as_str()).collect();
        rec.correct_at = rank_of_match(&cands, r.as_ref(), canonical);
    }
    Ok(())
}

pub const REPORTED_K: [usize; 4] = [1, 2, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Canonicalize both sides before matching.
    pub canonicalize: bool,
    /// Compute BLEU/ROUGE on the strings as given instead of canonical ones.
    pub raw_metrics: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { canonicalize: true, raw_metrics: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub bleu: f64,
    pub rouge: f64,
    /// Fraction of rank-1 predictions that are not valid molecules.
    pub invalid_rate: f64,
    /// References with several products, counted as wrong.
    pub multi_product_false: usize,
    pub canonicalized: bool,
}

/// Scores ranked candidate lists (best first) against references.
pub fn evaluate<S: AsRef<str>, R: AsRef<str>>(beams: &[Vec<S>], references: &[R], options: EvalOptions) -> Result<EvalReport, MetricsError> {
    check_len(beams.len(), references.len())?;
    let mut top_k_accuracy = BTreeMap::new();
    for k in REPORTED_K {
        top_k_accuracy.insert(k, topk_accuracy(beams, references, k, options.canonicalize)?);
    }
    let top1: Vec<Normalized> =
        beams.iter().map(|b| b.first().map_or(Normalized { text: String::new(), valid: false }, |s| normalize(s.as_ref(), !options.raw_metrics))).collect();
    let refs: Vec<String> = references.iter().map(|r| normalize(r.as_ref(), !options.raw_metrics).text).collect();
    let cand_tokens: Vec<Vec<String>> = top1.iter().map(|p| smiles_tokens(&p.text)).collect();
    let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| smiles_tokens(r)).collect();
    Ok(EvalReport {
        n: beams.len(),
        top_k_accuracy,
        bleu: bleu(&cand_tokens, &ref_tokens),
        rouge: rouge_l(&cand_tokens, &ref_tokens),
        invalid_rate: ratio(top1.iter().filter(|p| !p.valid).count(), beams.len()),
        multi_product_false: references.iter().filter(|r| is_multi_product(r.as_ref())).count(),
        canonicalized: options.canonicalize,
    })
}

impl EvalReport {
    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![("examples".into(), self.n.to_string())];
        for (k, v) in &self.top_k_accuracy {
            rows.push((format!("top-{k} accuracy"), format!("{:.4}", v)));
        }
        rows.push(("BLEU".into(), format!("{:.4}", self.bleu)));
        rows.push(("ROUGE-L".into(), format!("{:.4}", self.rouge)));
        rows.push(("invalid rate".into(), format!("{:.4}", self.invalid_rate)));
        rows.push(("multi-product (false)".into(), self.multi_product_false.to_string()));
        rows.push(("canonicalized".into(), self.canonicalized.to_string()));
        let w = rows.iter().map(|(a, _)| a.len()).max().unwrap_or(0);
        rows.iter().map(|(a, b)| format!("{a:<w$}  {b:>10}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases() {
        assert_eq!(full_sequence_accuracy(&["CCO"], &["CCO"], true).unwrap(), 1.0);
        assert_eq!(full_sequence_accuracy(&["OCC"], &["CCO"], true).unwrap(), 1.0);
        assert_eq!(full_sequence_accuracy(&["OCC"], &["CCO"], false).unwrap(), 0.0);
        assert_eq!(full_sequence_accuracy(&["CCO"], &["CCO.O"], true).unwrap(), 0.0);
        assert_eq!(full_sequence_accuracy(&["C("], &["C("], false).unwrap(), 0.0);
        assert_eq!(
            full_sequence_accuracy(&["C"], &["C", "O"], true),
            Err(MetricsError::LengthMismatch { predictions: 1, references: 2 })
        );
    }

    #[test]
    fn topk_cases() {
        let beams = vec![vec!["CC", "OCC", "C"]];
        let refs = ["CCO"];
        assert_eq!(topk_accuracy(&beams, &refs, 1, true).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&beams, &refs, 2, true).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&[vec!["C", "N"]], &["O"], 10, true).unwrap(), 0.0);
        assert_eq!(rank_of_match(&beams[0], "CCO", true), Some(2));
    }

    #[test]
    fn report_fields() {
        let beams = vec![vec!["OCC".to_string()], vec!["C(".to_string(), "N".to_string()]];
        let refs = ["CCO", "N"];
        let r = evaluate(&beams, &refs, EvalOptions::default()).unwrap();
        assert_eq!(r.n, 2);
        assert_eq!(r.top_k_accuracy[&1], 0.5);
        assert_eq!(r.top_k_accuracy[&2], 1.0);
        assert_eq!(r.invalid_rate, 0.5);
        assert_eq!(r.multi_product_false, 0);
        assert!(r.to_table().contains("top-1 accuracy"));
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    }

    #[test]
    fn identical_files_are_perfect() {
        let refs = ["CCO", "c1ccccc1", "CC(=O)O"];
        let beams: Vec<Vec<&str>> = refs.iter().map(|r| vec![*r]).collect();
        let r = evaluate(&beams, &refs, EvalOptions::default()).unwrap();
        assert!(r.top_k_accuracy.values().all(|&v| v == 1.0));
        assert_eq!((r.bleu, r.rouge, r.invalid_rate), (1.0, 1.0, 0.0));
    }
}
