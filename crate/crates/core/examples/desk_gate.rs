//! Desk-scale learning run: train the desk model on a 2,000-reaction toy corpus
//! and report held-out top-1 accuracy, listing every miss.
//!
//!   cargo run --release --example desk_gate [corpus_seed] [epochs]

use std::time::Instant;

use rxn_seq2seq::decoding::{beam_search_many, DecodeOptions, PredictionRecord};
use rxn_seq2seq::metrics::label_records;
use rxn_seq2seq::model::{train, Seq2Seq, TrainOptions};
use rxn_seq2seq::reaction::{preprocess_lines, EncodedExample, PreprocessOptions};
use rxn_seq2seq::toychem::{desk_config, generate_dataset, ToyGrammar};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(42), |s| s.parse())?;
    let epochs: usize = args.next().map_or(Ok(30), |s| s.parse())?;

    let lines = generate_dataset(2000, seed, &ToyGrammar::default());
    let data = preprocess_lines(lines.iter().map(String::as_str), &PreprocessOptions::default());
    let encode = |pairs: &[(Vec<String>, Vec<String>)]| pairs.iter().map(|(s, t)| EncodedExample::new(&data.vocab, s, t)).collect::<Vec<_>>();
    let (train_set, valid_set) = (encode(&data.train), encode(&data.valid));
    println!("train {} / valid {} / test {}", train_set.len(), valid_set.len(), data.test.len());

    let cfg = desk_config();
    let mut model = Seq2Seq::<f32>::new(cfg.clone(), data.vocab.len())?;
    let start = Instant::now();
    let options = TrainOptions { epochs, verbose: true, valid_max_len: cfg.max_target_len, ..TrainOptions::default() };
    train(&mut model, &train_set, &valid_set, &options)?;
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let sources: Vec<Vec<u32>> = data.test.iter().map(|(s, _)| data.vocab.encode(s)).collect();
    let beams = beam_search_many(&model, &sources, &DecodeOptions::default(), 1)?;
    let mut records: Vec<PredictionRecord> = beams.iter().zip(&data.test).map(|(b, (s, _))| PredictionRecord::from_beam(s.clone(), b, &data.vocab)).collect();
    let references: Vec<String> = data.test.iter().map(|(_, t)| t.concat()).collect();
    label_records(&mut records, &references, true)?;
    for (record, reference) in records.iter().zip(&references) {
        if !record.is_correct() {
            let top = record.candidates.first().map_or("", |c| c.smiles.as_str());
            println!("miss  {}  ->  {top}  (expected {reference})", record.source.concat());
        }
    }
    let correct = records.iter().filter(|r| r.is_correct()).count();
    println!("test top-1 {:.1}% ({correct}/{})", 100.0 * correct as f64 / records.len() as f64, records.len());
    Ok(())
}
