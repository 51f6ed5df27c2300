//! The `rxn` command line: every pipeline stage as a subcommand. Each run
//! writes its fully resolved configuration next to its outputs.

use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoding::{beam_search_many, confidence_curve, curve_to_csv, default_thresholds, export_attention, DecodeOptions, PredictionRecord};
use crate::hyperopt::{leaderboard, run_search, synthetic_objective, HpoError, SearchOptions, SearchSpace};
use crate::metrics::{evaluate, label_records, EvalOptions, MetricsError};
use crate::model::{greedy_accuracy, load_model, train, AttentionType, EncoderType, ModelConfig, ModelError, Seq2Seq, TrainOptions, CHECKPOINT_FILE};
use crate::numerics::CellVariant;
use crate::reaction::{preprocess_lines, EncodedExample, PreprocessOptions, Vocabulary};
use crate::toychem::{corpus_stats, generate_dataset, ToyGrammar};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

pub const SEED_ENV: &str = "RXN_SEED";
pub const DEFAULT_SEED: u64 = 42;
const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hpo(#[from] HpoError),
}

impl CliError {
    /// 2 for invalid input or configuration, 1 for I/O and runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Model(ModelError::Config(_) | ModelError::VocabularyMismatch { .. } | ModelError::UnknownTokenId { .. }) => 2,
            CliError::Hpo(HpoError::InvalidSpace(_)) => 2,
            _ => 1,
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// `RXN_SEED` if set, else the built-in default; an explicit flag wins.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Validation(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Appends `suffix` to the file name: `out.txt` → `out.txt.config.json`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

/// A reference or prediction line as one SMILES string; tokenized lines are
/// joined back together.
fn smiles_of(line: &str) -> String {
    line.split_whitespace().collect()
}

#[derive(Debug, Parser)]
#[command(name = "rxn", version, about = "Reaction outcome prediction with an attention seq2seq model over SMILES")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic substitution-reaction corpus.
    Datagen(DatagenArgs),
    /// Clean, split and tokenize a reaction file.
    Preprocess(PreprocessArgs),
    /// Train a model on preprocessed data.
    Train(TrainArgs),
    /// Beam-decode source lines with a trained model.
    Predict(PredictArgs),
    /// Score predictions against references.
    Evaluate(EvaluateArgs),
    /// Coverage/accuracy curve over confidence thresholds.
    Confidence(ConfidenceArgs),
    /// Hyperparameter search.
    Hpo(HpoArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DatagenArgs {
    /// Number of reaction lines.
    #[arg(short = 'n', long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of the reagent token set.
    #[arg(long, default_value_t = 76)]
    pub reagents: usize,
    /// train:valid:test weights.
    #[arg(long, default_value = "18:1:1")]
    pub ratios: String,
    #[arg(long, default_value_t = 256)]
    pub max_source_len: usize,
    #[arg(long, default_value_t = 160)]
    pub max_target_len: usize,
    /// Drop stereo marks instead of rejecting such lines.
    #[arg(long)]
    pub ignore_stereo: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(short, long)]
    pub data: PathBuf,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// JSON run configuration; flags override its values.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Encoder units; the decoder width follows.
    #[arg(long)]
    pub units: Option<usize>,
    /// Depth of both encoder and decoder.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub output_dropout: Option<f64>,
    #[arg(long)]
    pub state_dropout: Option<f64>,
    #[arg(long, value_parser = ["LSTM", "BLSTM"])]
    pub encoder: Option<String>,
    #[arg(long, value_parser = ["Luong", "Bahdanau"])]
    pub attention: Option<String>,
    /// Cell output `h = o ⊙ tanh(c_t)` (standard) or `tanh(c_{t-1})` (previous-cell).
    #[arg(long, value_parser = ["standard", "previous-cell"])]
    pub cell_output: Option<String>,
    /// Continue from the checkpoint in `out_dir`.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Training output directory (checkpoint and vocabulary).
    #[arg(short, long)]
    pub model: PathBuf,
    /// Tokenized source lines.
    #[arg(short, long)]
    pub src: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub beam: usize,
    #[arg(long, default_value_t = 160)]
    pub max_len: usize,
    /// Directory for one attention JSON per example (rank-1 hypothesis).
    #[arg(long)]
    pub attention_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(short, long)]
    pub predictions: PathBuf,
    /// Reference lines, tokenized or plain SMILES.
    #[arg(short, long)]
    pub references: PathBuf,
    /// Report JSON path.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Compare strings without canonicalization.
    #[arg(long)]
    pub no_canonicalize: bool,
    /// Compute BLEU/ROUGE on raw rather than canonical strings.
    #[arg(long)]
    pub raw_metrics: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ConfidenceArgs {
    #[arg(short, long)]
    pub predictions: PathBuf,
    #[arg(short, long)]
    pub references: PathBuf,
    /// CSV output path.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_canonicalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct HpoArgs {
    /// Preprocessed data directory; not needed with `--synthetic`.
    #[arg(short, long)]
    pub data: Option<PathBuf>,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// JSON search space; defaults to the standard space.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub budget: usize,
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Score configurations with a closed-form test objective instead of training.
    #[arg(long)]
    pub synthetic: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Datagen(a) => cmd_datagen(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Confidence(a) => cmd_confidence(&a),
        Command::Hpo(a) => cmd_hpo(&a),
    }
}

#[derive(Serialize)]
struct Resolved<'a, A: Serialize, C: Serialize> {
    version: u32,
    command: &'a str,
    args: &'a A,
    resolved: C,
}

fn persist<A: Serialize, C: Serialize>(path: &Path, command: &str, args: &A, resolved: C) -> Result<(), CliError> {
    write_json(path, &Resolved { version: CONFIG_VERSION, command, args, resolved })
}

pub fn cmd_datagen(a: &DatagenArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Validation("-n must be at least 1".into()));
    }
    let seed = resolve_seed(a.seed)?;
    let grammar = ToyGrammar::default();
    let corpus = generate_dataset(a.n, seed, &grammar);
    write(&a.out, &(corpus.join("\n") + "\n"))?;
    persist(&sidecar(&a.out, ".config.json"), "datagen", a, serde_json::json!({ "seed": seed, "grammar": grammar }))?;
    say!("{}", serde_json::to_string_pretty(&corpus_stats(&corpus)).expect("serializable"));
    Ok(())
}

fn parse_ratios(s: &str) -> Result<(u32, u32, u32), CliError> {
    let parts: Vec<u32> = s.split(':').map(|p| p.trim().parse()).collect::<Result<_, _>>().map_err(|_| CliError::Validation(format!("bad ratios {s:?}")))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok((a, b, c)),
        _ => Err(CliError::Validation(format!("ratios must be three positive integers a:b:c, got {s:?}"))),
    }
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<(), CliError> {
    let options = PreprocessOptions {
        ratios: parse_ratios(&a.ratios)?,
        seed: resolve_seed(a.seed)?,
        reagent_set_size: a.reagents,
        max_source_len: a.max_source_len,
        max_target_len: a.max_target_len,
        ignore_stereo: a.ignore_stereo,
    };
    let text = read(&a.input)?;
    let data = preprocess_lines(text.lines(), &options);
    data.write_to(&a.out_dir).map_err(io_err(&a.out_dir))?;
    persist(&a.out_dir.join("preprocess_config.json"), "preprocess", a, &options)?;
    say!("{}", serde_json::to_string_pretty(&data.report).expect("serializable"));
    Ok(())
}

/// JSON run configuration accepted by `train --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigFile {
    pub version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_epochs() -> usize {
    30
}

fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfigFile, CliError> {
    let mut cfg = match &a.config {
        Some(p) => parse_json::<TrainConfigFile>(p)?,
        None => TrainConfigFile { version: CONFIG_VERSION, model: ModelConfig::default(), epochs: default_epochs() },
    };
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::Validation(format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version)));
    }
    if a.config.is_none() || a.seed.is_some() {
        cfg.model.seed = resolve_seed(a.seed)?;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    let m = &mut cfg.model;
    if let Some(v) = a.batch_size {
        m.batch_size = v;
    }
    if let Some(v) = a.lr {
        m.lr0 = v;
    }
    if let Some(v) = a.decay {
        m.decay = v;
    }
    if let Some(v) = a.layers {
        m.layers_enc = v;
        m.layers_dec = v;
    }
    if let Some(v) = a.embedding_dim {
        m.embedding_dim = v;
    }
    if let Some(v) = a.output_dropout {
        m.output_dropout = v;
    }
    if let Some(v) = a.state_dropout {
        m.state_dropout = v;
    }
    if let Some(v) = &a.encoder {
        m.encoder_type = if v == "LSTM" { EncoderType::Lstm } else { EncoderType::Blstm };
    }
    if let Some(v) = &a.attention {
        m.attention = if v == "Luong" { AttentionType::Luong } else { AttentionType::Bahdanau };
    }
    if let Some(v) = &a.cell_output {
        m.cell = if v == "standard" { CellVariant::Standard } else { CellVariant::PreviousCell };
    }
    if let Some(v) = a.units {
        m.encoder_units = v;
    }
    if a.units.is_some() || a.encoder.is_some() {
        m.decoder_units = m.encoder_output_dim();
    }
    m.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

/// Reads `src-{split}.txt`/`tgt-{split}.txt` from a preprocessed directory.
pub fn load_split(dir: &Path, split: &str, vocab: &Vocabulary) -> Result<Vec<EncodedExample>, CliError> {
    let src = read(&dir.join(format!("src-{split}.txt")))?;
    let tgt = read(&dir.join(format!("tgt-{split}.txt")))?;
    let (src, tgt) = (lines(&src), lines(&tgt));
    if src.len() != tgt.len() {
        return Err(CliError::Validation(format!("{split}: {} source lines but {} target lines", src.len(), tgt.len())));
    }
    Ok(src
        .iter()
        .zip(&tgt)
        .map(|(s, t)| {
            let s: Vec<&str> = s.split_whitespace().collect();
            let t: Vec<&str> = t.split_whitespace().collect();
            EncodedExample::new(vocab, &s, &t)
        })
        .collect())
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::load(path).map_err(io_err(path))
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = resolve_train_config(a)?;
    let vocab = load_vocab(&a.data.join("vocab.txt"))?;
    let train_set = load_split(&a.data, "train", &vocab)?;
    let valid_set = load_split(&a.data, "valid", &vocab)?;
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    persist(&a.out_dir.join("run_config.json"), "train", a, &cfg)?;
    vocab.save(&a.out_dir.join("vocab.txt")).map_err(io_err(&a.out_dir))?;

    let mut model = Seq2Seq::<f32>::new(cfg.model.clone(), vocab.len())?;
    let options = TrainOptions {
        epochs: cfg.epochs,
        out_dir: Some(a.out_dir.clone()),
        resume: a.resume,
        vocab_hash: vocab.hash(),
        valid_max_len: cfg.model.max_target_len,
        verbose: !a.quiet,
    };
    let log = train(&mut model, &train_set, &valid_set, &options)?;
    if let Some(last) = log.epochs.last() {
        say!("epochs {}  train_loss {:.4}  valid_top1 {:.4}", last.epoch, last.train_loss, last.valid_top1);
    }
    Ok(())
}

fn load_trained(dir: &Path) -> Result<(Seq2Seq<f32>, Vocabulary), CliError> {
    let (model, header) = load_model(&dir.join(CHECKPOINT_FILE))?;
    let vocab = load_vocab(&dir.join("vocab.txt"))?;
    if !header.vocab_hash.is_empty() && header.vocab_hash != vocab.hash() {
        return Err(ModelError::VocabularyMismatch { expected: header.vocab_hash, found: vocab.hash() }.into());
    }
    if header.vocab_size != vocab.len() {
        return Err(CliError::Validation(format!("checkpoint expects {} tokens, vocabulary has {}", header.vocab_size, vocab.len())));
    }
    Ok((model, vocab))
}

pub fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    if a.beam == 0 {
        return Err(CliError::Validation("--beam must be at least 1".into()));
    }
    let (model, vocab) = load_trained(&a.model)?;
    let text = read(&a.src)?;
    let sources: Vec<Vec<String>> = lines(&text).iter().map(|l| l.split_whitespace().map(String::from).collect()).collect();
    let options = DecodeOptions { width: a.beam, max_len: a.max_len, record_attention: a.attention_out.is_some() };
    let nonempty: Vec<usize> = (0..sources.len()).filter(|&i| !sources[i].is_empty()).collect();
    let ids: Vec<Vec<u32>> = nonempty.iter().map(|&i| vocab.encode(&sources[i])).collect();
    let beams = beam_search_many(&model, &ids, &options, a.workers)?;

    let mut out = vec![String::new(); sources.len()];
    for (&i, beam) in nonempty.iter().zip(&beams) {
        let rec = PredictionRecord::from_beam(sources[i].clone(), beam, &vocab);
        out[i] = rec.to_line();
        if let (Some(dir), Some(top)) = (&a.attention_out, beam.first()) {
            if let Some(doc) = export_attention(top, &sources[i], &vocab, i) {
                write_json(&dir.join(format!("attention-{i}.json")), &doc)?;
            }
        }
    }
    write(&a.out, &(out.join("\n") + "\n"))?;
    persist(&sidecar(&a.out, ".config.json"), "predict", a, &options_summary(&options))?;
    say!("{} predictions written to {}", sources.len(), a.out.display());
    Ok(())
}

fn options_summary(o: &DecodeOptions) -> serde_json::Value {
    serde_json::json!({ "width": o.width, "max_len": o.max_len, "record_attention": o.record_attention })
}

fn load_records(predictions: &Path, references: &Path, canonical: bool) -> Result<(Vec<PredictionRecord>, Vec<String>), CliError> {
    let p = read(predictions)?;
    let r = read(references)?;
    let refs: Vec<String> = lines(&r).iter().map(|l| smiles_of(l)).collect();
    let mut records = lines(&p)
        .iter()
        .enumerate()
        .map(|(i, l)| PredictionRecord::from_line(l).map_err(|e| CliError::Validation(format!("{} line {}: {e}", predictions.display(), i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    label_records(&mut records, &refs, canonical)?;
    Ok((records, refs))
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let (records, refs) = load_records(&a.predictions, &a.references, !a.no_canonicalize)?;
    let beams: Vec<Vec<&str>> = records.iter().map(|r| r.candidates.iter().map(|c| c.smiles.as_str()).collect()).collect();
    let options = EvalOptions { canonicalize: !a.no_canonicalize, raw_metrics: a.raw_metrics };
    let report = evaluate(&beams, &refs, options)?;
    say!("{}", report.to_table().trim_end());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        persist(&sidecar(out, ".config.json"), "evaluate", a, serde_json::json!({ "canonicalize": options.canonicalize, "raw_metrics": options.raw_metrics }))?;
    }
    Ok(())
}

pub fn cmd_confidence(a: &ConfidenceArgs) -> Result<(), CliError> {
    let (records, _) = load_records(&a.predictions, &a.references, !a.no_canonicalize)?;
    let thresholds = default_thresholds();
    let curve = confidence_curve(&records, &thresholds);
    write(&a.out, &curve_to_csv(&curve))?;
    persist(&sidecar(&a.out, ".config.json"), "confidence", a, serde_json::json!({ "thresholds": thresholds }))?;
    if let Some(first) = curve.first() {
        say!("threshold 0: coverage {:.4}, accuracy {:.4}", first.coverage, first.accuracy);
    }
    Ok(())
}

pub fn cmd_hpo(a: &HpoArgs) -> Result<(), CliError> {
    let space = match &a.space {
        Some(p) => parse_json::<SearchSpace>(p)?,
        None => SearchSpace::default(),
    };
    space.validate()?;
    if a.budget == 0 {
        return Err(CliError::Validation("--budget must be at least 1".into()));
    }
    let options = SearchOptions { budget: a.budget, epochs_per_trial: a.epochs, seed: resolve_seed(a.seed)?, ..SearchOptions::default() };
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    persist(&a.out_dir.join("hpo_config.json"), "hpo", a, serde_json::json!({ "space": space, "search": options }))?;
    let history = a.out_dir.join("history.jsonl");

    let result = if a.synthetic {
        run_search(&space, &options, Some(&history), |c, _| Ok(synthetic_objective(c)))?
    } else {
        let data = a.data.as_ref().ok_or_else(|| CliError::Validation("--data is required unless --synthetic is set".into()))?;
        let vocab = load_vocab(&data.join("vocab.txt"))?;
        let train_set = load_split(data, "train", &vocab)?;
        let valid_set = load_split(data, "valid", &vocab)?;
        run_search(&space, &options, Some(&history), |config, epochs| {
            let mut model = Seq2Seq::<f32>::new(config.clone(), vocab.len()).map_err(|e| e.to_string())?;
            let opts = TrainOptions { epochs, valid_max_len: config.max_target_len, ..TrainOptions::default() };
            train(&mut model, &train_set, &valid_set, &opts).map_err(|e| e.to_string())?;
            greedy_accuracy(&model, &valid_set, config.max_target_len).map_err(|e| e.to_string())
        })?
    };
    let board = leaderboard(&result.history, 10);
    write(&a.out_dir.join("leaderboard.txt"), &board)?;
    write_json(&a.out_dir.join("best.json"), &result.best)?;
    say!("{}", board.trim_end());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_resolution_prefers_the_flag() {
        assert_eq!(resolve_seed(Some(7)).unwrap(), 7);
    }

    #[test]
    fn ratios_and_sidecars() {
        assert_eq!(parse_ratios("18:1:1").unwrap(), (18, 1, 1));
        assert!(parse_ratios("1:2").is_err());
        assert!(parse_ratios("18:0:1").is_err());
        assert!(parse_ratios("a:b:c").is_err());
        assert_eq!(sidecar(Path::new("out/p.txt"), ".config.json"), PathBuf::from("out/p.txt.config.json"));
        assert_eq!(smiles_of("C C ( = O ) O"), "CC(=O)O");
    }

    #[test]
    fn flags_override_and_invalid_dropout_is_rejected() {
        let args = |extra: &[&str]| {
            let mut v = vec!["rxn", "train", "--data", "d", "--out-dir", "o"];
            v.extend_from_slice(extra);
            match Cli::try_parse_from(v).unwrap().command {
                Command::Train(a) => a,
                _ => unreachable!(),
            }
        };
        let cfg = resolve_train_config(&args(&["--units", "32", "--encoder", "LSTM", "--epochs", "4", "--seed", "3", "--cell-output", "previous-cell"])).unwrap();
        assert_eq!((cfg.model.encoder_units, cfg.model.decoder_units, cfg.epochs, cfg.model.seed), (32, 32, 4, 3));
        assert_eq!(cfg.model.cell, CellVariant::PreviousCell);
        let err = resolve_train_config(&args(&["--output-dropout", "1.5"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("output_dropout"));
    }
}
