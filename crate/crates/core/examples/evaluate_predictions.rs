//! Score candidate lists: top-k accuracy, BLEU, ROUGE-L and the
//! coverage/accuracy curve.

use rxn_seq2seq::decoding::{confidence_curve, Candidate, PredictionRecord};
use rxn_seq2seq::metrics::{evaluate, label_records, EvalOptions};

fn main() {
    let beams = vec![
        vec!["COc1cncc(Br)c1", "COc1cncc(OC)c1"],
        vec!["c1ccccc1O", "Oc1ccccc1"],
        vec!["CCN", "CCO"],
    ];
    let refs = ["COc1cncc(Br)c1", "Oc1ccccc1", "CCO"];
    let report = evaluate(&beams, &refs, EvalOptions::default()).expect("same length");
    print!("{}", report.to_table());
    let raw = evaluate(&beams, &refs, EvalOptions { canonicalize: false, raw_metrics: true }).expect("same length");
    println!("top-1 without canonicalization: {:.3}\n", raw.top_k_accuracy[&1]);

    let confidences = [[0.9, 0.05], [0.6, 0.3], [0.4, 0.35]];
    let mut records: Vec<PredictionRecord> = beams
        .iter()
        .zip(confidences)
        .map(|(b, p)| PredictionRecord {
            source: vec![],
            candidates: b.iter().zip(p).map(|(s, p)| Candidate { smiles: s.to_string(), probability: p }).collect(),
            top1_confidence: p[0],
            correct_at: None,
            grammatical: true,
        })
        .collect();
    label_records(&mut records, &refs, true).expect("same length");
    for point in confidence_curve(&records, &[0.0, 0.5, 0.8, 0.95]) {
        println!("threshold {:.2}: coverage {:.2}, accuracy {:.2}", point.threshold, point.coverage, point.accuracy);
    }
}
