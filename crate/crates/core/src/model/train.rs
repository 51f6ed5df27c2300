use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Seq2Seq};
use crate::numerics::{clip_gradients, decay_schedule, derive_seed, load_checkpoint, save_checkpoint, sgd_step};
use crate::reaction::EncodedExample;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train_log.csv";
const CHECKPOINT_FORMAT: u32 = 1;
/// Batches per length-sorted bucket.
const BUCKET_BATCHES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Number of completed epochs.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_top1: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,valid_top1,lr,wall_seconds\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{:.6},{:.6},{:.6},{:.3}\n", r.epoch, r.train_loss, r.valid_top1, r.lr, r.wall_seconds));
        }
        s
    }
}

/// JSON header stored in front of the tensors of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: u32,
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub vocab_hash: String,
    /// Completed epochs; training resumes at this epoch index.
    pub epoch: usize,
    /// Learning rate used for the last completed epoch.
    pub lr: f64,
    pub log: TrainingLog,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Where `checkpoint.bin` and `train_log.csv` are written after every
    /// epoch; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Continue from `out_dir/checkpoint.bin` when it exists.
    pub resume: bool,
    pub vocab_hash: String,
    /// Decode limit for the validation accuracy.
    pub valid_max_len: usize,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 30, out_dir: None, resume: false, vocab_hash: String::new(), valid_max_len: 160, verbose: false }
    }
}

pub fn save_model(path: &Path, model: &Seq2Seq<f32>, header: &CheckpointHeader) -> Result<(), ModelError> {
    let json = serde_json::to_value(header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    save_checkpoint(path, &json, model.params())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Seq2Seq<f32>, CheckpointHeader), ModelError> {
    let (json, store) = load_checkpoint(path)?;
    let header: CheckpointHeader = serde_json::from_value(json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(ModelError::Checkpoint(format!("unsupported format {}", header.format)));
    }
    let mut model = Seq2Seq::zeroed(header.config.clone(), header.vocab_size)?;
    let tensors = store.iter().map(|t| (t.name.clone(), t.shape.clone(), t.values.clone())).collect();
    model.params_mut().load_values(tensors)?;
    Ok((model, header))
}

/// Shuffles the examples, sorts windows of [`BUCKET_BATCHES`] batches by
/// source length, cuts them into batches and shuffles the batch order.
/// Every example appears in exactly one batch.
fn epoch_batches(data: &[EncodedExample], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0, epoch as u64]));
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut batches = Vec::new();
    for window in order.chunks(batch_size * BUCKET_BATCHES) {
        let mut w = window.to_vec();
        w.sort_by_key(|&i| data[i].source_ids.len());
        batches.extend(w.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(&mut rng);
    batches
}

/// Fraction of examples whose greedy decode reproduces the target exactly.
pub fn greedy_accuracy(model: &Seq2Seq<f32>, data: &[EncodedExample], max_len: usize) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data[i].source_ids.len());
    let mut correct = 0;
    for chunk in order.chunks(64) {
        let sources: Vec<&[u32]> = chunk.iter().map(|&i| data[i].source_ids.as_slice()).collect();
        let preds = model.greedy_batch(&sources, max_len)?;
        correct += chunk.iter().zip(&preds).filter(|(&i, p)| data[i].target_ids[1..] == p[..]).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch SGD with gradient clipping and the step-decay schedule. The
/// shuffle and dropout masks of every batch derive from (seed, epoch,
/// batch), so a resumed run matches an uninterrupted one.
pub fn train(
    model: &mut Seq2Seq<f32>,
    train_set: &[EncodedExample],
    valid_set: &[EncodedExample],
    options: &TrainOptions,
) -> Result<TrainingLog, ModelError> {
    let cfg = model.config().clone();
    let mut log = TrainingLog::default();
    let mut start = 0;
    let ckpt = options.out_dir.as_ref().map(|d| d.join(CHECKPOINT_FILE));
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    if let Some(path) = ckpt.as_ref().filter(|p| options.resume && p.exists()) {
        let (loaded, header) = load_model(path)?;
        if header.config != cfg || header.vocab_size != model.vocab_size() {
            return Err(ModelError::Checkpoint("checkpoint was written with a different model configuration".into()));
        }
        if !options.vocab_hash.is_empty() && header.vocab_hash != options.vocab_hash {
            return Err(ModelError::VocabularyMismatch { expected: header.vocab_hash, found: options.vocab_hash.clone() });
        }
        *model = loaded;
        start = header.epoch;
        log = header.log;
    }
    let dropout = cfg.output_dropout > 0.0 || cfg.state_dropout > 0.0;

    for epoch in start..options.epochs {
        let started = Instant::now();
        let lr = decay_schedule(cfg.lr0, cfg.decay, epoch);
        let (mut loss_sum, mut tokens) = (0.0f64, 0usize);
        for (k, idx) in epoch_batches(train_set, cfg.batch_size, cfg.seed, epoch).iter().enumerate() {
            let batch: Vec<EncodedExample> = idx.iter().map(|&i| train_set[i].clone()).collect();
            let seed = dropout.then(|| derive_seed(cfg.seed, &[1, epoch as u64, k as u64]));
            let (loss, count, grads) = model.loss_and_grads(&batch, seed)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch: k });
            }
            let params = model.params_mut();
            params.accumulate(&grads);
            clip_gradients(params, cfg.clip_norm as f32)?;
            sgd_step(params, lr as f32)?;
            loss_sum += loss as f64 * count as f64;
            tokens += count;
        }
        let valid_top1 = greedy_accuracy(model, valid_set, options.valid_max_len)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: if tokens == 0 { 0.0 } else { loss_sum / tokens as f64 },
            valid_top1,
            lr,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if options.verbose {
            eprintln!(
                "epoch {:>3}  loss {:.4}  valid {:.3}  lr {:.4}  {:.1}s",
                record.epoch, record.train_loss, record.valid_top1, record.lr, record.wall_seconds
            );
        }
        log.epochs.push(record);
        if let (Some(dir), Some(path)) = (&options.out_dir, &ckpt) {
            let header = CheckpointHeader {
                format: CHECKPOINT_FORMAT,
                config: cfg.clone(),
                vocab_size: model.vocab_size(),
                vocab_hash: options.vocab_hash.clone(),
                epoch: epoch + 1,
                lr,
                log: log.clone(),
            };
            save_model(path, model, &header)?;
            std::fs::write(dir.join(LOG_FILE), log.to_csv())?;
        }
    }
    Ok(log)
}
