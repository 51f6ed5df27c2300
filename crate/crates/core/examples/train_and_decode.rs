//! Train a small model on a toy corpus, then beam-decode held-out reactions.
//! A few epochs only; see `desk_gate` for the full-length run.

use rxn_seq2seq::decoding::{beam_search, DecodeOptions, PredictionRecord};
use rxn_seq2seq::metrics::label_records;
use rxn_seq2seq::model::{train, ModelConfig, Seq2Seq, TrainOptions};
use rxn_seq2seq::reaction::{preprocess_lines, EncodedExample, PreprocessOptions};
use rxn_seq2seq::toychem::{generate_dataset, ToyGrammar};

fn main() {
    let lines = generate_dataset(400, 3, &ToyGrammar::default());
    let data = preprocess_lines(lines.iter().map(String::as_str), &PreprocessOptions::default());
    let encode = |pairs: &[(Vec<String>, Vec<String>)]| pairs.iter().map(|(s, t)| EncodedExample::new(&data.vocab, s, t)).collect::<Vec<_>>();

    let config = ModelConfig { encoder_units: 32, decoder_units: 64, embedding_dim: 32, batch_size: 8, decay: 0.9, ..ModelConfig::default() };
    let mut model = Seq2Seq::<f32>::new(config, data.vocab.len()).expect("valid config");
    let options = TrainOptions { epochs: 6, verbose: true, ..TrainOptions::default() };
    train(&mut model, &encode(&data.train), &encode(&data.valid), &options).expect("training");

    let decode = DecodeOptions { width: 5, max_len: 80, record_attention: false };
    let mut records = Vec::new();
    for (src, _) in data.test.iter().take(5) {
        let beam = beam_search(&model, &data.vocab.encode(src), &decode).expect("decoding");
        records.push(PredictionRecord::from_beam(src.clone(), &beam, &data.vocab));
    }
    let refs: Vec<String> = data.test.iter().take(5).map(|(_, t)| t.concat()).collect();
    label_records(&mut records, &refs, true).expect("same length");
    for (r, want) in records.iter().zip(&refs) {
        let top = &r.candidates[0];
        println!("{} -> {} (p={:.3}, rank of truth {:?}, want {want})", r.source.concat(), top.smiles, top.probability, r.correct_at);
    }
}
