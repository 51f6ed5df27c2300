//! Property tests across module boundaries.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rxn_seq2seq::decoding::{beam_search, DecodeOptions};
use rxn_seq2seq::metrics::{bleu, rouge_l};
use rxn_seq2seq::model::{ModelConfig, Seq2Seq};
use rxn_seq2seq::reaction::{preprocess_lines, PreprocessOptions};
use rxn_seq2seq::smiles::{canonical_smiles, canonicalize, detokenize, parse, tokenize};
use rxn_seq2seq::toychem::{generate_dataset, ToyGrammar};

const MOLECULES: &str = include_str!("fixtures/molecules.txt");

const TOKENS: &[&str] = &[
    "C", "c", "N", "n", "O", "o", "S", "s", "P", "F", "I", "Cl", "Br", "(", ")", "=", "#", "-", ".", "/", "\\", "1", "2", "9", "%12",
    "[NH4+]", "[O-]", "[nH]", "[C@@H]", "[13CH3]", "[Na+]",
];

fn molecules() -> Vec<&'static str> {
    MOLECULES.lines().collect()
}

proptest! {
    #[test]
    fn tokenize_inverts_detokenize(idx in prop::collection::vec(0..TOKENS.len(), 0..40)) {
        let tokens: Vec<&str> = idx.iter().map(|&i| TOKENS[i]).collect();
        let text = detokenize(&tokens);
        let back: Vec<String> = tokenize(&text).unwrap().into_iter().map(|t| t.into_string()).collect();
        prop_assert_eq!(back, tokens);
    }

    #[test]
    fn canonical_form_ignores_atom_order(i in 0usize..147, seed in any::<u64>()) {
        let mols = molecules();
        let m = mols[i % mols.len()];
        let want = canonicalize(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts: Vec<String> = parse(m)
            .unwrap()
            .iter()
            .map(|g| {
                let mut perm: Vec<usize> = (0..g.atom_count()).collect();
                perm.shuffle(&mut rng);
                canonical_smiles(&g.permuted(&perm))
            })
            .collect();
        parts.sort();
        prop_assert_eq!(parts.join("."), want.clone());
        prop_assert_eq!(canonicalize(&want).unwrap(), want);
    }

    #[test]
    fn toy_corpora_preprocess_cleanly(n in 1usize..120, seed in any::<u64>()) {
        let lines = generate_dataset(n, seed, &ToyGrammar::default());
        let data = preprocess_lines(lines.iter().map(String::as_str), &PreprocessOptions { seed, ..PreprocessOptions::default() });
        prop_assert_eq!(data.report.parse_failures, 0);
        let kept = data.train.len() + data.valid.len() + data.test.len();
        prop_assert_eq!(kept + data.report.duplicates_removed, n);
        for (_, tgt) in data.train.iter().chain(&data.valid).chain(&data.test) {
            let smiles = tgt.concat();
            prop_assert_eq!(canonicalize(&smiles).unwrap(), smiles);
        }
    }

    #[test]
    fn text_metrics_are_bounded(
        a in prop::collection::vec(prop::collection::vec(0usize..5, 0..12), 1..5),
        b in prop::collection::vec(prop::collection::vec(0usize..5, 0..12), 1..5),
    ) {
        let words = |v: &Vec<Vec<usize>>| v.iter().map(|s| s.iter().map(|&k| ["C", "c", "O", "N", "("][k].to_string()).collect()).collect::<Vec<Vec<String>>>();
        let n = a.len().min(b.len());
        let (x, y) = (words(&a)[..n].to_vec(), words(&b)[..n].to_vec());
        let score = bleu(&x, &y);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&score));
        prop_assert!((rouge_l(&x, &y) - rouge_l(&y, &x)).abs() < 1e-12);
        if x.iter().all(|s| s.len() >= 4) {
            prop_assert!((bleu(&x, &x) - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beams_are_sorted_and_bounded(seed in any::<u64>(), width in 1usize..8, src in prop::collection::vec(0u32..6, 1..5)) {
        let cfg = ModelConfig { encoder_units: 3, decoder_units: 6, embedding_dim: 4, init_scale: 1.0, seed, ..ModelConfig::default() };
        let model = Seq2Seq::<f64>::new(cfg, 6).unwrap();
        let beam = beam_search(&model, &src, &DecodeOptions { width, max_len: 6, record_attention: false }).unwrap();
        prop_assert!(!beam.is_empty() && beam.len() <= width);
        prop_assert!(beam.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
        prop_assert!(beam.iter().all(|h| h.log_prob <= 0.0 && h.token_ids.len() <= 6));
    }
}
