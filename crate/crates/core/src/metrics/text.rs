use std::collections::HashMap;

use crate::smiles::tokenize;

/// SMILES tokens of `s`; strings the tokenizer rejects fall back to
/// characters so that malformed predictions still score.
pub fn smiles_tokens(s: &str) -> Vec<String> {
    match tokenize(s) {
        Ok(t) => t.into_iter().map(|t| t.into_string()).collect(),
        Err(_) => s.chars().map(String::from).collect(),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU-4 with uniform weights, clipped counts, the standard brevity
/// penalty and no smoothing: zero when any order has no candidate n-grams
/// or no matches.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>]) -> f64 {
    let (mut matched, mut total) = ([0usize; 4], [0usize; 4]);
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        c_len += c.len();
        r_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (g, k) in ngram_counts(c, n) {
                matched[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if c_len == 0 || (0..4).any(|i| total[i] == 0 || matched[i] == 0) {
        return 0.0;
    }
    let log_p: f64 = (0..4).map(|i| (matched[i] as f64 / total[i] as f64).ln()).sum::<f64>() / 4.0;
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    bp * log_p.exp()
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 (β = 1) averaged over pairs; two empty sequences score 1.
pub fn rouge_l(candidates: &[Vec<String>], references: &[Vec<String>]) -> f64 {
    let n = candidates.len().min(references.len());
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| {
            if c.is_empty() && r.is_empty() {
                return 1.0;
            }
            let l = lcs_len(c, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let (p, rec) = (l / c.len() as f64, l / r.len() as f64);
            2.0 * p * rec / (p + rec)
        })
        .sum();
    sum / n as f64
}
