use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::model::{DecoderState, EncoderOutput, ModelError, Seq2Seq};
use crate::numerics::{log_softmax, Real};
use crate::reaction::{BOS, EOS};

/// A model that can be decoded one token at a time for a single source.
/// `State` holds any number of rows (partial hypotheses) at once.
pub trait StepModel {
    type Encoded;
    type State;

    fn vocab_size(&self) -> usize;
    fn encode(&self, source: &[u32]) -> Result<Self::Encoded, ModelError>;
    /// One-row state before the first step.
    fn initial_state(&self, encoded: &Self::Encoded) -> Self::State;
    /// Advances every row of `state` with its previous token `prev[r]`.
    fn step(&self, encoded: &Self::Encoded, state: &Self::State, prev: &[u32]) -> Result<StepScores<Self::State>, ModelError>;
    /// The rows `rows` of `state`, in that order.
    fn select(&self, state: &Self::State, rows: &[usize]) -> Self::State;
}

/// Result of [`StepModel::step`] for `rows` rows.
#[derive(Debug, Clone)]
pub struct StepScores<S> {
    /// rows × vocab next-token log-probabilities.
    pub log_probs: Vec<f64>,
    /// rows × source attention weights; empty if the model has none.
    pub attention: Vec<f64>,
    pub state: S,
}

impl<T: Real> StepModel for Seq2Seq<T> {
    type Encoded = EncoderOutput<T>;
    type State = DecoderState<T>;

    fn vocab_size(&self) -> usize {
        Seq2Seq::vocab_size(self)
    }

    fn encode(&self, source: &[u32]) -> Result<Self::Encoded, ModelError> {
        Seq2Seq::encode(self, &[source])
    }

    fn initial_state(&self, encoded: &Self::Encoded) -> Self::State {
        Seq2Seq::initial_state(self, encoded, &[0])
    }

    fn step(&self, encoded: &Self::Encoded, state: &Self::State, prev: &[u32]) -> Result<StepScores<Self::State>, ModelError> {
        let row_ex = vec![0; prev.len()];
        let out = self.decode_step(encoded, &row_ex, state, prev)?;
        let v = Seq2Seq::vocab_size(self);
        let log_probs = out.logits.chunks(v).flat_map(log_softmax).collect();
        let attention = out.alpha.iter().map(|a| a.f64()).collect();
        Ok(StepScores { log_probs, attention, state: out.state })
    }

    fn select(&self, state: &Self::State, rows: &[usize]) -> Self::State {
        state.select(rows)
    }
}

/// A decoded (partial) sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    /// Predicted ids, ending in EOS when finished.
    pub token_ids: Vec<u32>,
    /// Sum of the per-step log-probabilities of `token_ids`.
    pub log_prob: f64,
    /// True iff the sequence ended with EOS; truncated ones are unfinished.
    pub finished: bool,
    /// One attention row per decoded token, if recorded.
    pub attention_rows: Option<Vec<Vec<f64>>>,
}

impl BeamHypothesis {
    fn empty(record: bool) -> Self {
        BeamHypothesis { token_ids: Vec::new(), log_prob: 0.0, finished: false, attention_rows: record.then(Vec::new) }
    }

    /// Predicted ids without the trailing EOS.
    pub fn content(&self) -> &[u32] {
        match self.token_ids.split_last() {
            Some((&EOS, rest)) if self.finished => rest,
            _ => &self.token_ids,
        }
    }

    pub fn probability(&self) -> f64 {
        self.log_prob.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub width: usize,
    pub max_len: usize,
    pub record_attention: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { width: 10, max_len: 160, record_attention: false }
    }
}

/// Higher log-probability first, then lexicographically smaller ids (which
/// also puts a prefix before its extensions).
fn rank<'a>(a: (f64, impl Iterator<Item = &'a u32>), b: (f64, impl Iterator<Item = &'a u32>)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

enum Candidate {
    Kept(usize),
    Extend { row: usize, token: u32, log_prob: f64 },
}

/// Beam search without length normalization. Every live hypothesis is
/// extended by every vocabulary token and the `width` best survive;
/// finished hypotheses keep their slots and compete with live ones.
/// Hypotheses still live after `max_len` tokens are returned unfinished.
/// The result is sorted best first.
///
/// # Panics
/// If `options.width` is zero.
pub fn beam_search<M: StepModel>(model: &M, source: &[u32], options: &DecodeOptions) -> Result<Vec<BeamHypothesis>, ModelError> {
    assert!(options.width >= 1, "beam width must be at least 1");
    let v = model.vocab_size();
    let enc = model.encode(source)?;
    let mut state = model.initial_state(&enc);
    let mut live = vec![BeamHypothesis::empty(options.record_attention)];
    let mut done: Vec<BeamHypothesis> = Vec::new();

    for _ in 0..options.max_len {
        if live.is_empty() {
            break;
        }
        let prev: Vec<u32> = live.iter().map(|h| h.token_ids.last().copied().unwrap_or(BOS)).collect();
        let scores = model.step(&enc, &state, &prev)?;
        let s = if live.is_empty() { 0 } else { scores.attention.len() / live.len() };

        let mut cands: Vec<Candidate> = (0..done.len()).map(Candidate::Kept).collect();
        for (row, h) in live.iter().enumerate() {
            for (token, lp) in scores.log_probs[row * v..(row + 1) * v].iter().enumerate() {
                cands.push(Candidate::Extend { row, token: token as u32, log_prob: h.log_prob + lp });
            }
        }
        let seq = |c: &Candidate| -> (f64, &[u32], Option<u32>) {
            match *c {
                Candidate::Kept(i) => (done[i].log_prob, &done[i].token_ids, None),
                Candidate::Extend { row, token, log_prob } => (log_prob, &live[row].token_ids, Some(token)),
            }
        };
        cands.sort_by(|a, b| {
            let ((la, pa, ta), (lb, pb, tb)) = (seq(a), seq(b));
            rank((la, pa.iter().chain(ta.iter())), (lb, pb.iter().chain(tb.iter())))
        });
        cands.truncate(options.width);

        let mut next_done = Vec::new();
        let mut next_live = Vec::new();
        let mut rows = Vec::new();
        for c in cands {
            match c {
                Candidate::Kept(i) => next_done.push(done[i].clone()),
                Candidate::Extend { row, token, log_prob } => {
                    let parent = &live[row];
                    let mut token_ids = parent.token_ids.clone();
                    token_ids.push(token);
                    let attention_rows = parent.attention_rows.as_ref().map(|a| {
                        let mut a = a.clone();
                        a.push(scores.attention[row * s..(row + 1) * s].to_vec());
                        a
                    });
                    let h = BeamHypothesis { token_ids, log_prob, finished: token == EOS, attention_rows };
                    if h.finished {
                        next_done.push(h);
                    } else {
                        rows.push(row);
                        next_live.push(h);
                    }
                }
            }
        }
        state = model.select(&scores.state, &rows);
        live = next_live;
        done = next_done;
    }

    done.extend(live);
    done.sort_by(|a, b| rank((a.log_prob, a.token_ids.iter()), (b.log_prob, b.token_ids.iter())));
    Ok(done)
}

/// Picks the most probable next token at every step (ties to the lowest
/// id) until EOS or `max_len` tokens.
pub fn greedy_decode<M: StepModel>(model: &M, source: &[u32], max_len: usize, record_attention: bool) -> Result<BeamHypothesis, ModelError> {
    let v = model.vocab_size();
    let enc = model.encode(source)?;
    let mut state = model.initial_state(&enc);
    let mut h = BeamHypothesis::empty(record_attention);
    while h.token_ids.len() < max_len && !h.finished {
        let prev = h.token_ids.last().copied().unwrap_or(BOS);
        let scores = model.step(&enc, &state, &[prev])?;
        let totals: Vec<f64> = scores.log_probs[..v].iter().map(|lp| h.log_prob + lp).collect();
        let best = (0..v).fold(0, |b, k| if totals[k] > totals[b] { k } else { b });
        h.token_ids.push(best as u32);
        h.log_prob = totals[best];
        h.finished = best as u32 == EOS;
        if let Some(rows) = h.attention_rows.as_mut() {
            rows.push(scores.attention.clone());
        }
        state = scores.state;
    }
    Ok(h)
}

/// Beam-decodes many sources on up to `workers` threads; output order
/// follows `sources`.
pub fn beam_search_many<M>(model: &M, sources: &[Vec<u32>], options: &DecodeOptions, workers: usize) -> Result<Vec<Vec<BeamHypothesis>>, ModelError>
where
    M: StepModel + Sync,
{
    let workers = workers.clamp(1, sources.len().max(1));
    if workers == 1 {
        return sources.iter().map(|s| beam_search(model, s, options)).collect();
    }
    let chunk = sources.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| beam_search(model, s, options)).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut out = Vec::with_capacity(sources.len());
        for h in handles {
            out.extend(h.join().expect("decoding thread panicked")?);
        }
        Ok(out)
    })
}
