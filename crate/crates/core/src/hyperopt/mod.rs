//! Sequential model-based hyperparameter search with a boosted-tree
//! surrogate over a mixed categorical/continuous space.

mod gbrt;

pub use gbrt::{BoostParams, BoostedTrees};

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AttentionType, EncoderType, ModelConfig};
use crate::numerics::derive_seed;

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("the surrogate needs at least 2 trials, found {found}")]
    InsufficientHistory { found: usize },
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("history line {line}: {message}")]
    BadHistory { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The searched dimensions. Everything else comes from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub units: Vec<usize>,
    pub layers: Vec<usize>,
    pub encoder_type: Vec<EncoderType>,
    pub output_dropout: (f64, f64),
    pub state_dropout: (f64, f64),
    pub variational: Vec<bool>,
    /// Sampled log-uniformly.
    pub lr: (f64, f64),
    pub decay: (f64, f64),
    pub attention: Vec<AttentionType>,
    pub base: ModelConfig,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            units: vec![128, 256, 512, 1024],
            layers: vec![2, 4, 6],
            encoder_type: vec![EncoderType::Lstm, EncoderType::Blstm],
            output_dropout: (0.0, 0.9),
            state_dropout: (0.0, 0.9),
            variational: vec![true, false],
            lr: (0.1, 5.0),
            decay: (0.85, 0.99),
            attention: vec![AttentionType::Luong, AttentionType::Bahdanau],
            base: ModelConfig::default(),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), issues: &mut Vec<String>) {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        issues.push(format!("{name} range ({lo}, {hi}) is not an interval"));
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), HpoError> {
        let mut issues = Vec::new();
        for (name, empty) in [
            ("units", self.units.is_empty()),
            ("layers", self.layers.is_empty()),
            ("encoder_type", self.encoder_type.is_empty()),
            ("variational", self.variational.is_empty()),
            ("attention", self.attention.is_empty()),
        ] {
            if empty {
                issues.push(format!("{name} has no values"));
            }
        }
        if self.units.contains(&0) || self.layers.contains(&0) {
            issues.push("units and layers must be positive".into());
        }
        check_range("output_dropout", self.output_dropout, &mut issues);
        check_range("state_dropout", self.state_dropout, &mut issues);
        check_range("lr", self.lr, &mut issues);
        check_range("decay", self.decay, &mut issues);
        if self.lr.0 <= 0.0 {
            issues.push("lr must be positive".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(HpoError::InvalidSpace(issues.join("; ")))
        }
    }

    /// Whether the searched fields of `config` lie inside the space.
    pub fn contains(&self, c: &ModelConfig) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        self.units.contains(&c.encoder_units)
            && c.decoder_units == c.encoder_units * c.directions()
            && self.layers.contains(&c.layers_enc)
            && c.layers_dec == c.layers_enc
            && self.encoder_type.contains(&c.encoder_type)
            && within(c.output_dropout, self.output_dropout)
            && within(c.state_dropout, self.state_dropout)
            && self.variational.contains(&c.variational)
            && within(c.lr0, self.lr)
            && within(c.decay, self.decay)
            && self.attention.contains(&c.attention)
    }

    /// Feature vector for the surrogate: ordinal sizes scaled to [0, 1],
    /// one-hot categoricals, continuous values scaled to [0, 1] (lr on a
    /// log scale).
    pub fn encode(&self, c: &ModelConfig) -> Vec<f64> {
        fn ordinal(levels: &[usize], v: usize) -> f64 {
            let mut sorted = levels.to_vec();
            sorted.sort_unstable();
            let i = sorted.iter().position(|&l| l >= v).unwrap_or(sorted.len() - 1);
            if sorted.len() < 2 {
                0.0
            } else {
                i as f64 / (sorted.len() - 1) as f64
            }
        }
        fn scale(v: f64, (lo, hi): (f64, f64)) -> f64 {
            if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.0
            }
        }
        fn one_hot<T: PartialEq>(levels: &[T], v: &T, out: &mut Vec<f64>) {
            out.extend(levels.iter().map(|l| f64::from(u8::from(l == v))));
        }
        let mut x = vec![ordinal(&self.units, c.encoder_units), ordinal(&self.layers, c.layers_enc)];
        one_hot(&self.encoder_type, &c.encoder_type, &mut x);
        x.push(scale(c.output_dropout, self.output_dropout));
        x.push(scale(c.state_dropout, self.state_dropout));
        one_hot(&self.variational, &c.variational, &mut x);
        x.push(scale(c.lr0.ln(), (self.lr.0.ln(), self.lr.1.ln())));
        x.push(scale(c.decay, self.decay));
        one_hot(&self.attention, &c.attention, &mut x);
        x
    }
}

/// Draws a configuration: uniform over categoricals and continuous ranges,
/// log-uniform over the learning rate. Decoder size follows the encoder
/// (doubled for BLSTM) and both stacks share one depth.
pub fn sample_config<R: Rng>(space: &SearchSpace, rng: &mut R) -> ModelConfig {
    let pick = |v: &[usize], rng: &mut R| *v.choose(rng).expect("validated space");
    let uniform = |(lo, hi): (f64, f64), rng: &mut R| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let units = pick(&space.units, rng);
    let layers = pick(&space.layers, rng);
    let encoder_type = *space.encoder_type.choose(rng).expect("validated space");
    let output_dropout = uniform(space.output_dropout, rng);
    let state_dropout = uniform(space.state_dropout, rng);
    let variational = *space.variational.choose(rng).expect("validated space");
    let lr0 = uniform((space.lr.0.ln(), space.lr.1.ln()), rng).exp().clamp(space.lr.0, space.lr.1);
    let decay = uniform(space.decay, rng);
    let attention = *space.attention.choose(rng).expect("validated space");
    let mut c = ModelConfig {
        encoder_units: units,
        layers_enc: layers,
        layers_dec: layers,
        encoder_type,
        output_dropout,
        state_dropout,
        variational,
        lr0,
        decay,
        attention,
        ..space.base.clone()
    };
    c.decoder_units = units * c.directions();
    c
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: ModelConfig,
    /// Validation top-1 accuracy in [0, 1]; 0 for failed trials.
    pub objective: f64,
    pub epochs_run: usize,
    pub wall_seconds: f64,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Boosted-tree model of objective as a function of the encoded config.
#[derive(Debug, Clone)]
pub struct Surrogate {
    space: SearchSpace,
    model: BoostedTrees,
}

impl Surrogate {
    pub fn predict(&self, config: &ModelConfig) -> f64 {
        self.model.predict(&self.space.encode(config))
    }
}

pub fn fit_surrogate(space: &SearchSpace, history: &[TrialRecord], params: BoostParams) -> Result<Surrogate, HpoError> {
    if history.len() < 2 {
        return Err(HpoError::InsufficientHistory { found: history.len() });
    }
    let x: Vec<Vec<f64>> = history.iter().map(|t| space.encode(&t.config)).collect();
    let y: Vec<f64> = history.iter().map(|t| t.objective).collect();
    Ok(Surrogate { space: space.clone(), model: BoostedTrees::fit(&x, &y, params) })
}

/// With probability `explore_frac` a fresh random configuration; otherwise
/// the best-predicted of `n_candidates` random draws (earliest on ties).
pub fn propose<R: Rng>(surrogate: &Surrogate, space: &SearchSpace, n_candidates: usize, explore_frac: f64, rng: &mut R) -> ModelConfig {
    if rng.gen::<f64>() < explore_frac {
        return sample_config(space, rng);
    }
    let mut best: Option<(f64, ModelConfig)> = None;
    for _ in 0..n_candidates.max(1) {
        let c = sample_config(space, rng);
        let p = surrogate.predict(&c);
        if best.as_ref().is_none_or(|(b, _)| p > *b) {
            best = Some((p, c));
        }
    }
    best.expect("at least one candidate").1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub budget: usize,
    pub epochs_per_trial: usize,
    pub seed: u64,
    pub n_candidates: usize,
    pub explore_frac: f64,
    pub boost: BoostParams,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: 16, epochs_per_trial: 3, seed: 42, n_candidates: 512, explore_frac: 0.2, boost: BoostParams::default() }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: TrialRecord,
    pub history: Vec<TrialRecord>,
}

/// Reads a JSON-lines history; a missing file is an empty history.
pub fn read_history(path: &Path) -> Result<Vec<TrialRecord>, HpoError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| HpoError::BadHistory { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Runs `budget` trials: ⌈budget/5⌉ random ones, then fit–propose–evaluate.
/// Each trial's proposal depends only on (seed, trial index, earlier
/// history), so a search resumed from `history_path` repeats the
/// uninterrupted one. Failed trials score 0 and the search continues.
pub fn run_search<F>(space: &SearchSpace, options: &SearchOptions, history_path: Option<&Path>, mut train_fn: F) -> Result<SearchResult, HpoError>
where
    F: FnMut(&ModelConfig, usize) -> Result<f64, String>,
{
    space.validate()?;
    let mut history = match history_path {
        Some(p) => read_history(p)?,
        None => Vec::new(),
    };
    history.truncate(options.budget);
    let mut sink = match history_path {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let warm = options.budget.div_ceil(5);
    for trial in history.len()..options.budget {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, &[trial as u64]));
        let mut config = if trial < warm || history.len() < 2 {
            sample_config(space, &mut rng)
        } else {
            let s = fit_surrogate(space, &history, options.boost)?;
            propose(&s, space, options.n_candidates, options.explore_frac, &mut rng)
        };
        config.seed = derive_seed(options.seed, &[trial as u64, 1]);
        let started = Instant::now();
        let outcome = train_fn(&config, options.epochs_per_trial);
        let (objective, failed, error) = match outcome {
            Ok(v) if v.is_finite() => (v.clamp(0.0, 1.0), false, None),
            Ok(v) => (0.0, true, Some(format!("non-finite objective {v}"))),
            Err(e) => (0.0, true, Some(e)),
        };
        let record = TrialRecord {
            trial,
            config,
            objective,
            epochs_run: options.epochs_per_trial,
            wall_seconds: started.elapsed().as_secs_f64(),
            failed,
            error,
        };
        if let Some(f) = sink.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&record).expect("serializable"))?;
            f.flush()?;
        }
        history.push(record);
    }
    let best = best_trial(&history).cloned().ok_or(HpoError::InsufficientHistory { found: 0 })?;
    Ok(SearchResult { best, history })
}

/// Highest objective; the earliest trial wins ties.
pub fn best_trial(history: &[TrialRecord]) -> Option<&TrialRecord> {
    history.iter().fold(None, |b: Option<&TrialRecord>, t| match b {
        Some(b) if b.objective >= t.objective => Some(b),
        _ => Some(t),
    })
}

/// Trials ranked by objective as an aligned text table.
pub fn leaderboard(history: &[TrialRecord], top: usize) -> String {
    let mut ranked: Vec<&TrialRecord> = history.iter().collect();
    ranked.sort_by(|a, b| b.objective.total_cmp(&a.objective).then(a.trial.cmp(&b.trial)));
    let mut out = format!(
        "{:>4} {:>5} {:>9} {:>5} {:>6} {:>5} {:>8} {:>7} {:>6} {:>6} {:>6} {:>4}\n",
        "rank", "trial", "objective", "units", "layers", "enc", "attn", "lr", "decay", "out_do", "st_do", "var"
    );
    for (i, t) in ranked.iter().take(top).enumerate() {
        let c = &t.config;
        out.push_str(&format!(
            "{:>4} {:>5} {:>9.4} {:>5} {:>6} {:>5} {:>8} {:>7.4} {:>6.3} {:>6.3} {:>6.3} {:>4}{}\n",
            i + 1,
            t.trial,
            t.objective,
            c.encoder_units,
            c.layers_enc,
            match c.encoder_type {
                EncoderType::Lstm => "LSTM",
                EncoderType::Blstm => "BLSTM",
            },
            format!("{:?}", c.attention),
            c.lr0,
            c.decay,
            c.output_dropout,
            c.state_dropout,
            if c.variational { "yes" } else { "no" },
            if t.failed { "  (failed)" } else { "" },
        ));
    }
    out
}

/// Smooth test objective with its maximum 1 at 1024 units and lr = 1.
pub fn synthetic_objective(c: &ModelConfig) -> f64 {
    let units = 0.6 * (c.encoder_units as f64 / 128.0).log2().clamp(0.0, 3.0) / 3.0;
    let lr = 0.4 * (1.0 - c.lr0.ln().abs() / 10f64.ln()).max(0.0);
    units + lr
}
