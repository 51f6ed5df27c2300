//! Acceptance checks for the whole system, one line per criterion.
//! Run with `cargo test --test acceptance`; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rxn_seq2seq::decoding::{beam_search, beam_search_many, confidence_curve, default_thresholds, DecodeOptions, PredictionRecord, StepModel};
use rxn_seq2seq::hyperopt::{run_search, sample_config, synthetic_objective, SearchOptions, SearchSpace};
use rxn_seq2seq::metrics::{bleu, full_sequence_accuracy, label_records, rouge_l, topk_accuracy};
use rxn_seq2seq::model::{train, AttentionType, EncoderType, ModelConfig, Seq2Seq, TrainOptions};
use rxn_seq2seq::numerics::{grad_check, lstm_cell_backward, lstm_cell_forward, CellVariant, LstmState, LstmWeights, ParamStore, DEFAULT_EPS};
use rxn_seq2seq::reaction::{preprocess_lines, EncodedExample, PreprocessOptions, BOS, EOS};
use rxn_seq2seq::smiles::{canonical_smiles, canonicalize, detokenize, parse, tokenize, write_smiles};
use rxn_seq2seq::toychem::{desk_config, generate_dataset, ToyGrammar};

type Check = Result<String, String>;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn fixture(name: &str) -> Vec<String> {
    std::fs::read_to_string(Path::new(FIXTURES).join(name)).expect("fixture").lines().map(String::from).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -----------------------------------------------------------------------

const ENTRY_23738: &str = "[Cl:1][c:2]1[cH:3][c:4]([CH3:8])[n:5][n:6]1[CH3:7].[OH:14][N+:15]([O-:16])=[O:17].[S:9](=[O:10])(=[O:11])([OH:12])[OH:13]>>[Cl:1][c:2]1[c:3]([N+:15](=[O:14])[O-:16])[c:4]([CH3:8])[n:5][n:6]1[CH3:7]";
const TABLE_SOURCE: &str = "C c 1 c c ( Cl ) n ( C ) n 1 . O = [N+] ( [O-] ) O > A_O=S(=O)(O)O";
const TABLE_TARGET: &str = "C c 1 n n ( C ) c ( Cl ) c 1 [N+] ( = O ) [O-]";

fn tokenizer_fidelity() -> Check {
    let strings = fixture("smiles_1000.txt");
    ensure(strings.len() == 1000, || format!("fixture has {} strings", strings.len()))?;
    for s in &strings {
        let tokens = tokenize(s).map_err(|e| format!("{s}: {e}"))?;
        ensure(detokenize(&tokens) == *s, || format!("round trip changed {s}"))?;
    }
    let data = preprocess_lines([ENTRY_23738], &PreprocessOptions::default());
    let pairs: Vec<_> = data.train.iter().chain(&data.valid).chain(&data.test).collect();
    ensure(pairs.len() == 1, || format!("expected one prepared pair, got {}", pairs.len()))?;
    let (src, tgt) = (pairs[0].0.join(" "), pairs[0].1.join(" "));
    ensure(src == TABLE_SOURCE, || format!("source {src:?}"))?;
    ensure(tgt == TABLE_TARGET, || format!("target {tgt:?}"))?;
    Ok("1000/1000 round trips; entry-23738 source/target lines exact".into())
}

// 2 -----------------------------------------------------------------------

fn canonical_invariance() -> Check {
    let molecules = fixture("molecules.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in &molecules {
        let want = canonicalize(m).map_err(|e| format!("{m}: {e}"))?;
        ensure(canonicalize(&want).as_ref() == Ok(&want), || format!("{m}: not idempotent"))?;
        let graphs = parse(m).map_err(|e| format!("{m}: {e}"))?;
        for _ in 0..50 {
            let mut direct = Vec::new();
            let mut written = Vec::new();
            for g in &graphs {
                let mut perm: Vec<usize> = (0..g.atom_count()).collect();
                perm.shuffle(&mut rng);
                let p = g.permuted(&perm);
                direct.push(canonical_smiles(&p));
                let identity: Vec<usize> = (0..p.atom_count()).collect();
                written.push(write_smiles(&p, &identity));
            }
            direct.sort();
            let direct = direct.join(".");
            let reparsed = canonicalize(&written.join(".")).map_err(|e| format!("{m}: {e}"))?;
            ensure(direct == want && reparsed == want, || format!("{m}: {direct} / {reparsed} vs {want}"))?;
        }
    }
    Ok(format!("{} molecules x 50 permutations identical and idempotent", molecules.len()))
}

// 3 -----------------------------------------------------------------------

fn lstm_cell_check() -> f64 {
    let mut store = ParamStore::<f64>::new();
    let w = LstmWeights::register(&mut store, "cell", 3, 4);
    for (k, t) in store.iter_mut().enumerate() {
        for (i, v) in t.values.iter_mut().enumerate() {
            *v = ((k * 31 + i) as f64 * 0.37).sin() * 0.5;
        }
    }
    let x: Vec<f64> = (0..6).map(|k| (k as f64 * 0.9).sin()).collect();
    let prev = LstmState { h: (0..8).map(|k| (k as f64 * 1.3).cos() * 0.5).collect(), c: (0..8).map(|k| (k as f64 * 0.7).sin()).collect() };
    let coef: Vec<f64> = (0..8).map(|k| 1.0 + k as f64 * 0.25).collect();
    let loss = |s: &ParamStore<f64>| {
        let (next, _) = lstm_cell_forward(s, &w, CellVariant::Standard, &x, &prev).unwrap();
        next.h.iter().zip(&next.c).zip(&coef).map(|((h, c), k)| k * h + 0.5 * c * c).sum::<f64>()
    };
    let (next, cache) = lstm_cell_forward(&store, &w, CellVariant::Standard, &x, &prev).unwrap();
    let mut grads = store.grads_like();
    lstm_cell_backward(&store, &mut grads, &w, CellVariant::Standard, &cache, &coef, &next.c).unwrap();
    grad_check(&mut store, &grads, loss, DEFAULT_EPS, None, 0).max_relative_error
}

fn two_examples() -> Vec<EncodedExample> {
    let ex = |src: &[u32], tgt: &[u32]| {
        let mut target_ids = vec![BOS];
        target_ids.extend_from_slice(tgt);
        target_ids.push(EOS);
        EncodedExample { source_ids: src.to_vec(), target_ids }
    };
    vec![ex(&[4, 5, 6, 5], &[6, 4]), ex(&[7, 4], &[5, 5, 7])]
}

/// Finite-difference check of the teacher-forced loss, restricted to the
/// parameters whose names start with one of `prefixes` (all if empty).
fn model_check(cfg: ModelConfig, prefixes: &[&str]) -> f64 {
    let model = Seq2Seq::<f64>::new(cfg, 8).unwrap();
    let data = two_examples();
    let (_, _, full) = model.loss_and_grads(&data, None).unwrap();
    let mut sub = ParamStore::<f64>::new();
    for t in model.params().iter() {
        if prefixes.is_empty() || prefixes.iter().any(|p| t.name.starts_with(p)) {
            sub.push(t.clone());
        }
    }
    let mut analytic = sub.grads_like();
    for t in sub.iter() {
        let (s, m) = (sub.id(&t.name).unwrap(), model.params().id(&t.name).unwrap());
        analytic.get_mut(s).copy_from_slice(full.get(m));
    }
    let loss = |p: &ParamStore<f64>| {
        let mut m = model.clone();
        for t in p.iter() {
            let id = m.params().id(&t.name).unwrap();
            m.params_mut().get_mut(id).values.clone_from(&t.values);
        }
        m.teacher_forced_loss(&data).unwrap().0
    };
    grad_check(&mut sub, &analytic, loss, DEFAULT_EPS, Some(600), 11).max_relative_error
}

fn tiny(layers: usize) -> ModelConfig {
    ModelConfig {
        encoder_units: 3,
        decoder_units: 6,
        layers_enc: layers,
        layers_dec: layers,
        encoder_type: EncoderType::Blstm,
        attention: AttentionType::Luong,
        embedding_dim: 4,
        init_scale: 0.5,
        seed: 3,
        ..ModelConfig::default()
    }
}

fn gradient_correctness() -> Check {
    let errors = [
        ("LSTM cell", lstm_cell_check()),
        ("BLSTM encoder layer", model_check(tiny(1), &["enc.0."])),
        ("Luong attention", model_check(tiny(1), &["attn."])),
        ("full loss", model_check(tiny(2), &[])),
    ];
    let detail = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(errors.iter().all(|(_, e)| *e < 1e-5), || format!("max relative error too large: {detail}"))?;
    Ok(format!("max relative errors: {detail}"))
}

// 4 -----------------------------------------------------------------------

/// Every sequence a beam may return at horizon `max_len`, best first.
fn exhaustive(model: &Seq2Seq<f64>, source: &[u32], max_len: usize) -> Vec<(Vec<u32>, f64)> {
    let enc = StepModel::encode(model, source).unwrap();
    let mut out = Vec::new();
    let mut stack = vec![(Vec::<u32>::new(), 0.0, StepModel::initial_state(model, &enc))];
    while let Some((ids, lp, state)) = stack.pop() {
        if ids.last() == Some(&EOS) || ids.len() == max_len {
            out.push((ids, lp));
            continue;
        }
        let s = model.step(&enc, &state, &[ids.last().copied().unwrap_or(BOS)]).unwrap();
        for k in 0..model.vocab_size() {
            let mut next = ids.clone();
            next.push(k as u32);
            stack.push((next, lp + s.log_probs[k], s.state.clone()));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

fn beam_exactness() -> Check {
    let options = DecodeOptions { width: 256, max_len: 4, record_attention: false };
    for seed in 0..100u64 {
        let cfg = ModelConfig { encoder_units: 3, decoder_units: 6, embedding_dim: 4, init_scale: 1.5, seed, ..ModelConfig::default() };
        let model = Seq2Seq::<f64>::new(cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source: Vec<u32> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..4)).collect();
        let want = exhaustive(&model, &source, 4);
        let got = beam_search(&model, &source, &options).map_err(|e| e.to_string())?;
        for (r, (g, w)) in got.iter().zip(&want).take(10).enumerate() {
            ensure(g.token_ids == w.0 && (g.log_prob - w.1).abs() < 1e-9, || {
                format!("seed {seed} rank {}: beam {:?} ({}) vs exhaustive {:?} ({})", r + 1, g.token_ids, g.log_prob, w.0, w.1)
            })?;
        }
        ensure(got.len() >= 10, || format!("seed {seed}: only {} hypotheses", got.len()))?;
    }
    Ok("top-10 identical to exhaustive ranking for 100 seeds".into())
}

// 5-8 ---------------------------------------------------------------------

const GATE_CORPUS_SEED: u64 = 42;

struct GateRun {
    beams: Vec<Vec<String>>,
    references: Vec<String>,
    records: Vec<PredictionRecord>,
    top1: f64,
}

fn learning_gate(run: &mut Option<GateRun>) -> Check {
    let lines = generate_dataset(2000, GATE_CORPUS_SEED, &ToyGrammar::default());
    let data = preprocess_lines(lines.iter().map(String::as_str), &PreprocessOptions::default());
    let encode = |pairs: &[(Vec<String>, Vec<String>)]| pairs.iter().map(|(s, t)| EncodedExample::new(&data.vocab, s, t)).collect::<Vec<_>>();
    let (train_set, valid_set) = (encode(&data.train), encode(&data.valid));
    let cfg = desk_config();
    let mut model = Seq2Seq::<f32>::new(cfg.clone(), data.vocab.len()).map_err(|e| e.to_string())?;
    let options = TrainOptions { epochs: 30, valid_max_len: cfg.max_target_len, ..TrainOptions::default() };
    train(&mut model, &train_set, &valid_set, &options).map_err(|e| e.to_string())?;

    let sources: Vec<Vec<u32>> = data.test.iter().map(|(s, _)| data.vocab.encode(s)).collect();
    let decoded = beam_search_many(&model, &sources, &DecodeOptions::default(), 1).map_err(|e| e.to_string())?;
    let mut records: Vec<PredictionRecord> = decoded.iter().zip(&data.test).map(|(b, (s, _))| PredictionRecord::from_beam(s.clone(), b, &data.vocab)).collect();
    let references: Vec<String> = data.test.iter().map(|(_, t)| t.concat()).collect();
    label_records(&mut records, &references, true).map_err(|e| e.to_string())?;
    let beams: Vec<Vec<String>> = records.iter().map(|r| r.candidates.iter().map(|c| c.smiles.clone()).collect()).collect();
    let top1 = records.iter().filter(|r| r.is_correct()).count() as f64 / records.len() as f64;
    let detail = format!("test top-1 {:.1}% on {} held-out reactions (train {}, valid {})", 100.0 * top1, records.len(), train_set.len(), valid_set.len());
    *run = Some(GateRun { beams, references, records, top1 });
    ensure(top1 >= 0.90, || detail.clone())?;
    Ok(detail)
}

fn gate<'a>(run: &'a Option<GateRun>) -> Result<&'a GateRun, String> {
    run.as_ref().ok_or_else(|| "gate model unavailable".to_string())
}

fn canonical_rescue(run: &Option<GateRun>) -> Check {
    let g = gate(run)?;
    let top: Vec<&str> = g.beams.iter().map(|b| b.first().map_or("", String::as_str)).collect();
    let raw = full_sequence_accuracy(&top, &g.references, false).map_err(|e| e.to_string())?;
    let canon = full_sequence_accuracy(&top, &g.references, true).map_err(|e| e.to_string())?;
    let detail = format!("canonical {:.1}% vs raw {:.1}%", 100.0 * canon, 100.0 * raw);
    ensure(canon >= raw, || detail.clone())?;
    Ok(detail)
}

fn confidence_contract(run: &Option<GateRun>) -> Check {
    let g = gate(run)?;
    let curve = confidence_curve(&g.records, &default_thresholds());
    ensure(curve[0].threshold == 0.0 && curve[0].coverage == 1.0, || format!("coverage at 0 is {}", curve[0].coverage))?;
    ensure(curve.windows(2).all(|w| w[1].coverage <= w[0].coverage), || "coverage increases somewhere".into())?;
    ensure(curve[0].accuracy == g.top1, || format!("accuracy at 0 {} vs top-1 {}", curve[0].accuracy, g.top1))?;
    Ok(format!("{} thresholds; coverage 1.0 -> {:.2}", curve.len(), curve.last().unwrap().coverage))
}

fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
    lines.iter().map(|l| l.split_whitespace().map(String::from).collect()).collect()
}

fn metric_oracles(run: &Option<GateRun>) -> Check {
    // (candidates, references, BLEU, ROUGE-L), all computed by hand.
    let fixtures: [(&[&str], &[&str], f64, f64); 5] = [
        (&["C C O C"], &["C C O C"], 1.0, 1.0),
        (&["C C C O"], &["C C C O C"], (-0.25f64).exp(), 8.0 / 9.0),
        (&["C C C C C C"], &["C C C C O"], (1.0f64 / 15.0).powf(0.25), 8.0 / 11.0),
        (&["C C O C C", "C O C N"], &["C C O C C", "C O C C N"], (-1.0f64 / 9.0).exp() * (0.8f64 * 2.0 / 3.0).powf(0.25), 17.0 / 18.0),
        (&["C C O", "N C"], &["C O C C", "N C"], 0.0, 11.0 / 14.0),
    ];
    for (i, (c, r, b, l)) in fixtures.iter().enumerate() {
        let (c, r) = (corpus(c), corpus(r));
        let (gb, gl) = (bleu(&c, &r), rouge_l(&c, &r));
        ensure((gb - b).abs() < 1e-9 && (gl - l).abs() < 1e-9, || format!("fixture {}: BLEU {gb} vs {b}, ROUGE-L {gl} vs {l}", i + 1))?;
    }
    let g = gate(run)?;
    let acc: Vec<f64> = (1..=10).map(|k| topk_accuracy(&g.beams, &g.references, k, true)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(acc.windows(2).all(|w| w[0] <= w[1]), || format!("top-k not monotone: {acc:?}"))?;
    Ok(format!("5/5 fixtures; top-1..10 {:.3} -> {:.3}", acc[0], acc[9]))
}

// 9 -----------------------------------------------------------------------

fn hpo_sanity() -> Check {
    let space = SearchSpace::default();
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let options = SearchOptions { budget: 16, seed, ..SearchOptions::default() };
        let found = run_search(&space, &options, None, |c, _| Ok(synthetic_objective(c))).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let baseline = (0..10_000).map(|_| synthetic_objective(&sample_config(&space, &mut rng))).fold(f64::MIN, f64::max);
        ratios.push(found.best.objective / baseline);
    }
    let detail = format!("search/random-best ratios {}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" "));
    ensure(ratios.iter().all(|&r| r >= 0.95), || detail.clone())?;
    Ok(detail)
}

// 10 ----------------------------------------------------------------------

fn run_pipeline(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let steps: [&[&str]; 5] = [
        &["datagen", "-n", "300", "--seed", "5", "--out", "raw.txt"],
        &["preprocess", "--input", "raw.txt", "--out-dir", "data", "--seed", "5"],
        &["train", "--data", "data", "--out-dir", "model", "--epochs", "2", "--units", "16", "--embedding-dim", "16", "--batch-size", "16", "--seed", "5", "--quiet"],
        &["predict", "--model", "model", "--src", "data/src-test.txt", "--out", "pred.txt", "--beam", "5"],
        &["evaluate", "--predictions", "pred.txt", "--references", "data/tgt-test.txt", "--out", "report.json"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_rxn")).args(args).current_dir(dir).env_remove("RXN_SEED").output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("rxn {}: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
    }
    let read = |f: &str| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"));
    Ok((read("pred.txt")?, read("report.json")?))
}

fn pipeline_determinism() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    ensure(first.0 == second.0, || "prediction files differ".into())?;
    ensure(first.1 == second.1, || "report files differ".into())?;
    Ok(format!("predictions ({} B) and report ({} B) byte-identical", first.0.len(), first.1.len()))
}

// -------------------------------------------------------------------------

fn report(id: usize, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = check();
    let elapsed = start.elapsed();
    let result = match (result, limit) {
        (Ok(d), Some(l)) if elapsed > l => Err(format!("{d}; over the {:.0} s limit", l.as_secs_f64())),
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {tag}  {name}: {detail} ({:.2} s)", elapsed.as_secs_f64());
    result.is_ok()
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut gate_run = None;
    let results = [
        report(1, "tokenizer fidelity", secs(1), tokenizer_fidelity),
        report(2, "canonicalization invariance", secs(30), canonical_invariance),
        report(3, "gradient correctness", secs(60), gradient_correctness),
        report(4, "beam exactness", secs(60), beam_exactness),
        report(5, "desk-scale learning gate", secs(15 * 60), || learning_gate(&mut gate_run)),
        report(6, "canonicalization rescue", None, || canonical_rescue(&gate_run)),
        report(7, "confidence-curve contract", None, || confidence_contract(&gate_run)),
        report(8, "metric oracles", None, || metric_oracles(&gate_run)),
        report(9, "HPO sanity", secs(10), hpo_sanity),
        report(10, "pipeline determinism", None, pipeline_determinism),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
