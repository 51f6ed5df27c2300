use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_backward, attention_forward, AttnCache, AttnParams};
use super::recurrent::{run_sequence, run_sequence_backward, SeqRun};
use super::{AttentionType, EncoderType, ModelConfig, ModelError};
use crate::numerics::{gemm, init_uniform, softmax_in_place, Grads, LstmState, LstmWeights, ParamId, ParamStore, Real, StepDropout};
use crate::reaction::{EncodedExample, EOS, PAD};

/// Encoder result for a batch of sources.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    pub batch: usize,
    /// Longest source length in the batch.
    pub steps: usize,
    /// Width of each state (the decoder width).
    pub dim: usize,
    /// batch × steps × dim; rows past an example's length are padding.
    pub states: Vec<T>,
    pub lengths: Vec<usize>,
    /// Per encoder layer, the final forward (and backward) state
    /// concatenated, batch × dim; used to initialise the decoder.
    pub final_states: Vec<LstmState<T>>,
}

impl<T: Real> EncoderOutput<T> {
    /// Validity of each source position of example `b`.
    pub fn source_mask(&self, b: usize) -> Vec<bool> {
        (0..self.steps).map(|t| t < self.lengths[b]).collect()
    }

    /// The states of example `b`, steps × dim.
    pub fn example_states(&self, b: usize) -> &[T] {
        &self.states[b * self.steps * self.dim..(b + 1) * self.steps * self.dim]
    }
}

/// Per-layer decoder state for a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<T> {
    pub layers: Vec<LstmState<T>>,
    pub rows: usize,
}

impl<T: Real> DecoderState<T> {
    /// The state restricted to `rows`, in that order (rows may repeat).
    pub fn select(&self, rows: &[usize]) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let units = if self.rows == 0 { 0 } else { l.h.len() / self.rows };
                l.select(units, rows)
            })
            .collect();
        DecoderState { layers, rows: rows.len() }
    }
}

/// Output of one decoding step.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    /// rows × vocab.
    pub logits: Vec<T>,
    /// rows × encoder steps.
    pub alpha: Vec<T>,
    pub state: DecoderState<T>,
}

/// Context, weights and attention vector for a set of decoder rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput<T> {
    pub context: Vec<T>,
    pub weights: Vec<T>,
    pub vector: Vec<T>,
}

#[derive(Debug, Clone)]
struct Layout {
    embedding: ParamId,
    enc: Vec<Vec<LstmWeights>>,
    dec: Vec<LstmWeights>,
    attn: AttnParams,
    w_a: ParamId,
    w_p: ParamId,
}

/// Attention encoder–decoder over token ids.
#[derive(Debug, Clone)]
pub struct Seq2Seq<T: Real> {
    config: ModelConfig,
    vocab_size: usize,
    params: ParamStore<T>,
    layout: Layout,
}

struct Padded {
    rows: usize,
    steps: usize,
    /// Time-major: `ids[t * rows + r]`.
    ids: Vec<u32>,
    lens: Vec<usize>,
}

impl Padded {
    fn new(seqs: &[&[u32]]) -> Self {
        let rows = seqs.len();
        let steps = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![PAD; rows * steps];
        for (r, s) in seqs.iter().enumerate() {
            for (t, &id) in s.iter().enumerate() {
                ids[t * rows + r] = id;
            }
        }
        Padded { rows, steps, ids, lens: seqs.iter().map(|s| s.len()).collect() }
    }

    fn step(&self, t: usize) -> &[u32] {
        &self.ids[t * self.rows..(t + 1) * self.rows]
    }
}

struct EncoderCache<T> {
    src: Padded,
    /// Per layer: one run per direction and the output masks per step.
    layers: Vec<(Vec<SeqRun<T>>, Vec<Option<Vec<T>>>)>,
}

/// Dropout configuration for one forward pass.
struct Noise {
    rng: ChaCha8Rng,
    keep_out: f64,
    keep_state: f64,
    variational: bool,
}

impl Noise {
    fn off() -> Self {
        Noise { rng: ChaCha8Rng::seed_from_u64(0), keep_out: 1.0, keep_state: 1.0, variational: true }
    }

    fn state<T: Real>(&self, len: usize) -> StepDropout<T> {
        StepDropout::new(len, self.keep_state, self.variational)
    }

    fn output<T: Real>(&self, len: usize) -> StepDropout<T> {
        StepDropout::new(len, self.keep_out, self.variational)
    }
}

fn concat_rows<T: Real>(parts: &[&[T]], rows: usize) -> Vec<T> {
    let widths: Vec<usize> = parts.iter().map(|p| p.len() / rows.max(1)).collect();
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for r in 0..rows {
        for (p, &w) in parts.iter().zip(&widths) {
            out.extend_from_slice(&p[r * w..(r + 1) * w]);
        }
    }
    out
}

fn column_block<T: Real>(m: &[T], rows: usize, width: usize, from: usize, to: usize) -> Vec<T> {
    (0..rows).flat_map(|r| m[r * width + from..r * width + to].iter().copied()).collect()
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += *b);
}

fn apply_mask<T: Real>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(a, b)| *a *= *b);
    }
}

impl<T: Real> Seq2Seq<T> {
    /// Builds a model with parameters drawn from U(−init_scale, init_scale).
    pub fn new(config: ModelConfig, vocab_size: usize) -> Result<Self, ModelError> {
        let mut model = Self::zeroed(config, vocab_size)?;
        let s = model.config.init_scale;
        init_uniform(&mut model.params, -s, s, model.config.seed);
        Ok(model)
    }

    /// Builds a model with every parameter set to zero.
    pub fn zeroed(config: ModelConfig, vocab_size: usize) -> Result<Self, ModelError> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(ModelError::EmptyVocabulary);
        }
        let mut params = ParamStore::new();
        let (emb, hd, d) = (config.embedding_dim, config.decoder_units, config.encoder_output_dim());
        let embedding = params.add("embedding", &[vocab_size, emb]);
        let dirs = match config.encoder_type {
            EncoderType::Lstm => &["fwd"][..],
            EncoderType::Blstm => &["fwd", "bwd"][..],
        };
        let enc = (0..config.layers_enc)
            .map(|l| {
                let input = if l == 0 { emb } else { d };
                dirs.iter()
                    .map(|dir| LstmWeights::register(&mut params, &format!("enc.{l}.{dir}"), input, config.encoder_units))
                    .collect()
            })
            .collect();
        let dec = (0..config.layers_dec)
            .map(|l| LstmWeights::register(&mut params, &format!("dec.{l}"), if l == 0 { emb } else { hd }, hd))
            .collect();
        let attn = match config.attention {
            AttentionType::Luong => AttnParams::Luong { w_alpha: params.add("attn.w_alpha", &[hd, d]) },
            AttentionType::Bahdanau => AttnParams::Bahdanau {
                w_key: params.add("attn.w_key", &[d, hd]),
                w_query: params.add("attn.w_query", &[hd, hd]),
                v: params.add("attn.v", &[hd]),
            },
        };
        let w_a = params.add("attn.w_a", &[d + hd, hd]);
        let w_p = params.add("out.w_p", &[hd, vocab_size]);
        let layout = Layout { embedding, enc, dec, attn, w_a, w_p };
        Ok(Seq2Seq { config, vocab_size, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// The same model in another precision.
    pub fn cast<U: Real>(&self) -> Seq2Seq<U> {
        Seq2Seq { config: self.config.clone(), vocab_size: self.vocab_size, params: self.params.cast(), layout: self.layout.clone() }
    }

    fn hidden(&self) -> usize {
        self.config.decoder_units
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), ModelError> {
        match ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            Some(&id) => Err(ModelError::UnknownTokenId { id, vocab_size: self.vocab_size }),
            None => Ok(()),
        }
    }

    fn embed(&self, ids: &[u32]) -> Vec<T> {
        let e = self.config.embedding_dim;
        let table = self.params.value(self.layout.embedding);
        let mut out = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            out.extend_from_slice(&table[id as usize * e..(id as usize + 1) * e]);
        }
        out
    }

    fn embed_backward(&self, grads: &mut Grads<T>, ids: &[u32], d: &[T]) {
        let e = self.config.embedding_dim;
        let g = grads.get_mut(self.layout.embedding);
        for (r, &id) in ids.iter().enumerate() {
            add_into(&mut g[id as usize * e..(id as usize + 1) * e], &d[r * e..(r + 1) * e]);
        }
    }

    /// Encodes a batch of sources without dropout.
    pub fn encode(&self, sources: &[&[u32]]) -> Result<EncoderOutput<T>, ModelError> {
        Ok(self.encode_impl(sources, &mut Noise::off())?.0)
    }

    fn encode_impl(&self, sources: &[&[u32]], noise: &mut Noise) -> Result<(EncoderOutput<T>, EncoderCache<T>), ModelError> {
        for s in sources {
            if s.is_empty() {
                return Err(ModelError::EmptySequence);
            }
            if s.len() > self.config.max_source_len {
                return Err(ModelError::SequenceTooLong { len: s.len(), max: self.config.max_source_len });
            }
            self.check_ids(s)?;
        }
        let src = Padded::new(sources);
        let (rows, steps) = (src.rows, src.steps);
        let (units, d, variant) = (self.config.encoder_units, self.config.encoder_output_dim(), self.config.cell);

        let mut inputs: Vec<Vec<T>> = (0..steps).map(|t| self.embed(src.step(t))).collect();
        let mut layers = Vec::with_capacity(self.layout.enc.len());
        let mut final_states = Vec::with_capacity(self.layout.enc.len());
        for dirs in &self.layout.enc {
            let mut runs = Vec::with_capacity(dirs.len());
            for (k, w) in dirs.iter().enumerate() {
                let mut sd = noise.state(rows * units);
                let init = LstmState::zeros(rows, units);
                runs.push(run_sequence(&self.params, w, variant, &inputs, &src.lens, k == 1, init, &mut sd, &mut noise.rng)?);
            }
            let mut od = noise.output(rows * d);
            let mut masks = Vec::with_capacity(steps);
            for (t, slot) in inputs.iter_mut().enumerate() {
                let parts: Vec<&[T]> = runs.iter().map(|run| run.outputs[t].as_slice()).collect();
                *slot = concat_rows(&parts, rows);
                let mask = od.next(&mut noise.rng).map(|m| m.mask);
                apply_mask(slot, &mask);
                masks.push(mask);
            }
            let hs: Vec<&[T]> = runs.iter().map(|run| run.last.h.as_slice()).collect();
            let cs: Vec<&[T]> = runs.iter().map(|run| run.last.c.as_slice()).collect();
            final_states.push(LstmState { h: concat_rows(&hs, rows), c: concat_rows(&cs, rows) });
            layers.push((runs, masks));
        }

        let mut states = vec![T::zero(); rows * steps * d];
        for (t, out) in inputs.iter().enumerate() {
            for r in 0..rows {
                states[(r * steps + t) * d..(r * steps + t + 1) * d].copy_from_slice(&out[r * d..(r + 1) * d]);
            }
        }
        let output = EncoderOutput { batch: rows, steps, dim: d, states, lengths: src.lens.clone(), final_states };
        Ok((output, EncoderCache { src, layers }))
    }

    fn encode_backward(
        &self,
        grads: &mut Grads<T>,
        cache: &EncoderCache<T>,
        d_states: &[T],
        d_final: &[LstmState<T>],
    ) -> Result<(), ModelError> {
        let src = &cache.src;
        let (rows, steps) = (src.rows, src.steps);
        let (units, d, variant) = (self.config.encoder_units, self.config.encoder_output_dim(), self.config.cell);
        let mut d_out: Vec<Vec<T>> = (0..steps)
            .map(|t| (0..rows).flat_map(|r| d_states[(r * steps + t) * d..(r * steps + t + 1) * d].iter().copied()).collect())
            .collect();
        for (l, (dirs, (runs, masks))) in self.layout.enc.iter().zip(&cache.layers).enumerate().rev() {
            for (g, m) in d_out.iter_mut().zip(masks) {
                apply_mask(g, m);
            }
            let mut d_in: Vec<Vec<T>> = Vec::new();
            for (k, (w, run)) in dirs.iter().zip(runs).enumerate() {
                let (from, to) = (k * units, (k + 1) * units);
                let d_dir: Vec<Vec<T>> = d_out.iter().map(|g| column_block(g, rows, d, from, to)).collect();
                let d_last = match d_final.get(l) {
                    Some(s) => LstmState { h: column_block(&s.h, rows, d, from, to), c: column_block(&s.c, rows, d, from, to) },
                    None => LstmState::zeros(rows, units),
                };
                let (dx, _) = run_sequence_backward(&self.params, grads, w, variant, run, &src.lens, k == 1, &d_dir, d_last)?;
                if d_in.is_empty() {
                    d_in = dx;
                } else {
                    for (a, b) in d_in.iter_mut().zip(&dx) {
                        add_into(a, b);
                    }
                }
            }
            d_out = d_in;
        }
        for (t, g) in d_out.iter().enumerate() {
            self.embed_backward(grads, src.step(t), g);
        }
        Ok(())
    }

    /// Decoder state for `row_ex.len()` rows, row `r` initialised from the
    /// encoder's final states of example `row_ex[r]`. Decoder layers without
    /// a matching encoder layer start from zero.
    pub fn initial_state(&self, enc: &EncoderOutput<T>, row_ex: &[usize]) -> DecoderState<T> {
        let h = self.hidden();
        let layers = (0..self.layout.dec.len())
            .map(|l| match enc.final_states.get(l) {
                Some(s) => s.select(h, row_ex),
                None => LstmState::zeros(row_ex.len(), h),
            })
            .collect();
        DecoderState { layers, rows: row_ex.len() }
    }

    /// Attention for decoder rows with current top state `s` and previous
    /// top state `s_prev` (rows × H each).
    pub fn attend(&self, enc: &EncoderOutput<T>, s: &[T], s_prev: &[T], row_ex: &[usize]) -> Result<AttentionOutput<T>, ModelError> {
        let h = self.hidden();
        for (what, v) in [("s", s), ("s_prev", s_prev)] {
            if v.len() != row_ex.len() * h {
                return Err(ModelError::DimensionMismatch(format!("{what}: expected {} values, found {}", row_ex.len() * h, v.len())));
            }
        }
        if enc.dim != self.config.encoder_output_dim() || row_ex.iter().any(|&b| b >= enc.batch) {
            return Err(ModelError::DimensionMismatch("encoder output does not match the model".into()));
        }
        let c = attention_forward(&self.params, self.layout.attn, self.layout.w_a, enc, s, s_prev, row_ex, h);
        Ok(AttentionOutput { context: c.ctx, weights: c.alpha, vector: c.vector })
    }

    /// One inference step: embeds `prev`, advances every decoder layer,
    /// attends and projects to vocabulary logits.
    pub fn decode_step(
        &self,
        enc: &EncoderOutput<T>,
        row_ex: &[usize],
        state: &DecoderState<T>,
        prev: &[u32],
    ) -> Result<StepOutput<T>, ModelError> {
        self.check_ids(prev)?;
        let h = self.hidden();
        let mut x = self.embed(prev);
        let mut layers = Vec::with_capacity(state.layers.len());
        for (w, s) in self.layout.dec.iter().zip(&state.layers) {
            let (next, _) = crate::numerics::lstm_cell_forward(&self.params, w, self.config.cell, &x, s)?;
            x = next.h.clone();
            layers.push(next);
        }
        let s_prev = &state.layers.last().expect("decoder has layers").h;
        let cache = attention_forward(&self.params, self.layout.attn, self.layout.w_a, enc, &x, s_prev, row_ex, h);
        let mut logits = vec![T::zero(); row_ex.len() * self.vocab_size];
        gemm(false, false, row_ex.len(), self.vocab_size, h, T::one(), &cache.vector, self.params.value(self.layout.w_p), T::zero(), &mut logits);
        Ok(StepOutput { logits, alpha: cache.alpha, state: DecoderState { layers, rows: row_ex.len() } })
    }

    /// Greedy decoding of a batch; each result holds the predicted ids
    /// (ending in EOS unless `max_len` was reached). Ties go to the lowest id.
    pub fn greedy_batch(&self, sources: &[&[u32]], max_len: usize) -> Result<Vec<Vec<u32>>, ModelError> {
        let enc = self.encode(sources)?;
        let row_ex: Vec<usize> = (0..sources.len()).collect();
        let mut state = self.initial_state(&enc, &row_ex);
        let mut prev = vec![crate::reaction::BOS; sources.len()];
        let mut out = vec![Vec::new(); sources.len()];
        let mut done = vec![false; sources.len()];
        for _ in 0..max_len {
            if done.iter().all(|&d| d) {
                break;
            }
            let step = self.decode_step(&enc, &row_ex, &state, &prev)?;
            for r in 0..sources.len() {
                let row = &step.logits[r * self.vocab_size..(r + 1) * self.vocab_size];
                let best = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b }) as u32;
                prev[r] = best;
                if !done[r] {
                    out[r].push(best);
                    done[r] = best == EOS;
                }
            }
            state = step.state;
        }
        Ok(out)
    }

    /// Mean cross-entropy per non-PAD target token and the token count.
    pub fn teacher_forced_loss(&self, batch: &[EncodedExample]) -> Result<(T, usize), ModelError> {
        let (sum, count, _) = self.forward_backward(batch, None, false)?;
        Ok((Self::normalize(sum, count), count))
    }

    /// Loss and parameter gradients. With `dropout_seed` the configured
    /// dropout is active and its masks are drawn from that seed, so repeated
    /// calls with one seed see identical masks.
    pub fn loss_and_grads(&self, batch: &[EncodedExample], dropout_seed: Option<u64>) -> Result<(T, usize, Grads<T>), ModelError> {
        let (sum, count, grads) = self.forward_backward(batch, dropout_seed, true)?;
        Ok((Self::normalize(sum, count), count, grads.expect("requested")))
    }

    /// Loss with dropout active under `dropout_seed`, without gradients.
    pub fn loss_with_dropout(&self, batch: &[EncodedExample], dropout_seed: u64) -> Result<T, ModelError> {
        let (sum, count, _) = self.forward_backward(batch, Some(dropout_seed), false)?;
        Ok(Self::normalize(sum, count))
    }

    fn normalize(sum: T, count: usize) -> T {
        if count == 0 {
            T::zero()
        } else {
            sum / T::of(count as f64)
        }
    }

    fn forward_backward(
        &self,
        batch: &[EncodedExample],
        dropout_seed: Option<u64>,
        want_grads: bool,
    ) -> Result<(T, usize, Option<Grads<T>>), ModelError> {
        let mut noise = match dropout_seed {
            Some(seed) => Noise {
                rng: ChaCha8Rng::seed_from_u64(seed),
                keep_out: 1.0 - self.config.output_dropout,
                keep_state: 1.0 - self.config.state_dropout,
                variational: self.config.variational,
            },
            None => Noise::off(),
        };
        for ex in batch {
            if ex.target_ids.len() < 2 {
                return Err(ModelError::EmptySequence);
            }
            if ex.target_ids.len() - 2 > self.config.max_target_len {
                return Err(ModelError::SequenceTooLong { len: ex.target_ids.len() - 2, max: self.config.max_target_len });
            }
            self.check_ids(&ex.target_ids)?;
        }
        let sources: Vec<&[u32]> = batch.iter().map(|e| e.source_ids.as_slice()).collect();
        let (enc, enc_cache) = self.encode_impl(&sources, &mut noise)?;

        let b = batch.len();
        let h = self.hidden();
        let v = self.vocab_size;
        let inputs: Vec<&[u32]> = batch.iter().map(|e| &e.target_ids[..e.target_ids.len() - 1]).collect();
        let tgt = Padded::new(&inputs);
        let steps = tgt.steps;
        let rows = steps * b;
        let gold = |i: usize, r: usize| batch[r].target_ids.get(i + 1).copied();

        // decoder stack, layer by layer over all steps
        let init = self.initial_state(&enc, &(0..b).collect::<Vec<_>>());
        let mut x: Vec<Vec<T>> = (0..steps).map(|i| self.embed(tgt.step(i))).collect();
        let mut dec_runs = Vec::with_capacity(self.layout.dec.len());
        for (w, s0) in self.layout.dec.iter().zip(&init.layers) {
            let mut sd = noise.state(b * h);
            let run = run_sequence(&self.params, w, self.config.cell, &x, &tgt.lens, false, s0.clone(), &mut sd, &mut noise.rng)?;
            let mut od = noise.output(b * h);
            let mut masks = Vec::with_capacity(steps);
            for (i, slot) in x.iter_mut().enumerate() {
                *slot = run.outputs[i].clone();
                let mask = od.next(&mut noise.rng).map(|m| m.mask);
                apply_mask(slot, &mask);
                masks.push(mask);
            }
            dec_runs.push((run, masks));
        }

        let s: Vec<T> = x.concat();
        let top_init = &init.layers.last().expect("decoder has layers").h;
        let mut s_prev = Vec::with_capacity(rows * h);
        s_prev.extend_from_slice(top_init);
        for out in x.iter().take(steps.saturating_sub(1)) {
            s_prev.extend_from_slice(out);
        }
        let row_ex: Vec<usize> = (0..rows).map(|r| r % b).collect();
        let attn: AttnCache<T> = attention_forward(&self.params, self.layout.attn, self.layout.w_a, &enc, &s, &s_prev, &row_ex, h);
        let mut probs = vec![T::zero(); rows * v];
        gemm(false, false, rows, v, h, T::one(), &attn.vector, self.params.value(self.layout.w_p), T::zero(), &mut probs);

        let floor = T::of(crate::numerics::PROB_FLOOR);
        let mut sum = T::zero();
        let mut count = 0usize;
        for i in 0..steps {
            for r in 0..b {
                let row = &mut probs[(i * b + r) * v..(i * b + r + 1) * v];
                softmax_in_place(row);
                if i < tgt.lens[r] {
                    let y = gold(i, r).expect("target continues") as usize;
                    sum -= row[y].max(floor).ln();
                    count += 1;
                }
            }
        }
        if !want_grads {
            return Ok((sum, count, None));
        }

        // backward
        let mut grads = self.params.grads_like();
        let scale = T::one() / T::of(count.max(1) as f64);
        let mut dlogits = probs;
        for i in 0..steps {
            for r in 0..b {
                let row = &mut dlogits[(i * b + r) * v..(i * b + r + 1) * v];
                if i < tgt.lens[r] {
                    row[gold(i, r).expect("target continues") as usize] -= T::one();
                    row.iter_mut().for_each(|g| *g *= scale);
                } else {
                    row.iter_mut().for_each(|g| *g = T::zero());
                }
            }
        }
        gemm(true, false, h, v, rows, T::one(), &attn.vector, &dlogits, T::one(), grads.get_mut(self.layout.w_p));
        let mut d_vector = vec![T::zero(); rows * h];
        gemm(false, true, rows, h, v, T::one(), &dlogits, self.params.value(self.layout.w_p), T::zero(), &mut d_vector);
        let (ds, ds_prev, d_states) =
            attention_backward(&self.params, &mut grads, self.layout.attn, self.layout.w_a, &enc, &attn, &d_vector, h);

        let mut d_out: Vec<Vec<T>> = (0..steps).map(|i| ds[i * b * h..(i + 1) * b * h].to_vec()).collect();
        for i in 1..steps {
            add_into(&mut d_out[i - 1], &ds_prev[i * b * h..(i + 1) * b * h]);
        }
        let mut d_init: Vec<LstmState<T>> = Vec::with_capacity(dec_runs.len());
        for (l, (w, (run, masks))) in self.layout.dec.iter().zip(&dec_runs).enumerate().rev() {
            for (g, m) in d_out.iter_mut().zip(masks) {
                apply_mask(g, m);
            }
            let (dx, mut d0) = run_sequence_backward(
                &self.params,
                &mut grads,
                w,
                self.config.cell,
                run,
                &tgt.lens,
                false,
                &d_out,
                LstmState::zeros(b, h),
            )?;
            if l + 1 == dec_runs.len() {
                add_into(&mut d0.h, &ds_prev[..b * h]);
            }
            d_init.push(d0);
            d_out = dx;
        }
        d_init.reverse();
        for (i, g) in d_out.iter().enumerate() {
            self.embed_backward(&mut grads, tgt.step(i), g);
        }
        let d_final: Vec<LstmState<T>> = d_init.into_iter().take(self.layout.enc.len()).collect();
        self.encode_backward(&mut grads, &enc_cache, &d_states, &d_final)?;
        Ok((sum, count, Some(grads)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, DEFAULT_EPS};
    use crate::reaction::BOS;

    fn tiny(encoder_type: EncoderType, attention: AttentionType) -> ModelConfig {
        let units = 3;
        ModelConfig {
            encoder_units: units,
            decoder_units: if encoder_type == EncoderType::Blstm { 2 * units } else { units },
            layers_enc: 2,
            layers_dec: 2,
            encoder_type,
            attention,
            embedding_dim: 4,
            init_scale: 0.5,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    fn ex(src: &[u32], tgt: &[u32]) -> EncodedExample {
        let mut target_ids = vec![BOS];
        target_ids.extend_from_slice(tgt);
        target_ids.push(EOS);
        EncodedExample { source_ids: src.to_vec(), target_ids }
    }

    fn batch() -> Vec<EncodedExample> {
        vec![ex(&[4, 5, 6, 5], &[6, 4]), ex(&[7, 4], &[5, 5, 7])]
    }

    fn check_model(cfg: ModelConfig, dropout: Option<u64>) -> f64 {
        let model = Seq2Seq::<f64>::new(cfg, 8).unwrap();
        let data = batch();
        let (_, _, grads) = model.loss_and_grads(&data, dropout).unwrap();
        let mut params = model.params.clone();
        let probe = model.clone();
        let report = grad_check(
            &mut params,
            &grads,
            |p| {
                let mut m = probe.clone();
                m.params = p.clone();
                match dropout {
                    Some(seed) => m.loss_with_dropout(&data, seed).unwrap(),
                    None => m.teacher_forced_loss(&data).unwrap().0,
                }
            },
            DEFAULT_EPS,
            Some(400),
            7,
        );
        report.max_relative_error
    }

    #[test]
    fn gradients_blstm_luong() {
        let err = check_model(tiny(EncoderType::Blstm, AttentionType::Luong), None);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn gradients_lstm_bahdanau() {
        let err = check_model(tiny(EncoderType::Lstm, AttentionType::Bahdanau), None);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn gradients_with_fixed_dropout_masks() {
        for variational in [true, false] {
            let cfg = ModelConfig { output_dropout: 0.3, state_dropout: 0.4, variational, ..tiny(EncoderType::Blstm, AttentionType::Bahdanau) };
            let err = check_model(cfg, Some(99));
            assert!(err < 1e-5, "{err}");
        }
    }

    #[test]
    fn zero_params_give_uniform_distribution_and_zero_states() {
        let model = Seq2Seq::<f64>::zeroed(tiny(EncoderType::Blstm, AttentionType::Luong), 8).unwrap();
        let enc = model.encode(&[&[4]]).unwrap();
        assert_eq!((enc.steps, enc.dim), (1, 6));
        assert!(enc.states.iter().all(|&x| x == 0.0));
        let state = model.initial_state(&enc, &[0]);
        let step = model.decode_step(&enc, &[0], &state, &[BOS]).unwrap();
        assert!(step.logits.iter().all(|&x| x == 0.0));
        let (loss, n) = model.teacher_forced_loss(&batch()).unwrap();
        assert_eq!(n, 3 + 4);
        assert!((loss - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shapes_and_masks() {
        let model = Seq2Seq::<f64>::new(tiny(EncoderType::Blstm, AttentionType::Luong), 8).unwrap();
        let enc = model.encode(&[&[4, 5, 6, 7, 4], &[5, 6]]).unwrap();
        assert_eq!(enc.states.len(), 2 * 5 * 6);
        assert_eq!(enc.source_mask(0), vec![true; 5]);
        assert_eq!(enc.source_mask(1), vec![true, true, false, false, false]);
        let state = model.initial_state(&enc, &[0, 1, 1]);
        let step = model.decode_step(&enc, &[0, 1, 1], &state, &[BOS, BOS, 6]).unwrap();
        for r in 0..3 {
            let a = &step.alpha[r * 5..(r + 1) * 5];
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if r > 0 {
                assert_eq!(&a[2..], [0.0, 0.0, 0.0]);
            }
        }
        assert!(matches!(model.encode(&[&[9]]), Err(ModelError::UnknownTokenId { id: 9, .. })));
    }

    #[test]
    fn padding_does_not_change_results() {
        let model = Seq2Seq::<f64>::new(tiny(EncoderType::Blstm, AttentionType::Bahdanau), 8).unwrap();
        let data = batch();
        let (joint, n) = model.teacher_forced_loss(&data).unwrap();
        let (a, na) = model.teacher_forced_loss(&data[..1]).unwrap();
        let (b, nb) = model.teacher_forced_loss(&data[1..]).unwrap();
        assert_eq!(n, na + nb);
        let weighted = (a * na as f64 + b * nb as f64) / n as f64;
        assert!((joint - weighted).abs() < 1e-12);
    }

    #[test]
    fn blstm_halves_mirror_on_palindromes() {
        let cfg = ModelConfig { layers_enc: 1, layers_dec: 1, ..tiny(EncoderType::Blstm, AttentionType::Luong) };
        let mut model = Seq2Seq::<f64>::new(cfg, 8).unwrap();
        for part in ["w", "u", "b"] {
            let fwd = model.params.id(&format!("enc.0.fwd.{part}")).unwrap();
            let bwd = model.params.id(&format!("enc.0.bwd.{part}")).unwrap();
            let values = model.params.value(fwd).to_vec();
            model.params.get_mut(bwd).values = values;
        }
        let src = [4, 6, 5, 6, 4];
        let enc = model.encode(&[&src]).unwrap();
        let (t_len, d, u) = (5, 6, 3);
        for t in 0..t_len {
            let fwd = &enc.states[t * d..t * d + u];
            let mirror = t_len - 1 - t;
            let bwd = &enc.states[mirror * d + u..(mirror + 1) * d];
            for (a, b) in fwd.iter().zip(bwd) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn luong_hand_case() {
        let cfg = ModelConfig {
            encoder_units: 2,
            decoder_units: 2,
            layers_enc: 1,
            layers_dec: 1,
            encoder_type: EncoderType::Lstm,
            embedding_dim: 2,
            ..ModelConfig::default()
        };
        let mut model = Seq2Seq::<f64>::zeroed(cfg, 5).unwrap();
        let w_alpha = model.params.id("attn.w_alpha").unwrap();
        model.params.get_mut(w_alpha).values = vec![1.0, 0.0, 0.0, 1.0];
        let enc = EncoderOutput {
            batch: 1,
            steps: 2,
            dim: 2,
            states: vec![1.0, 0.0, 0.0, 1.0],
            lengths: vec![2],
            final_states: vec![LstmState::zeros(1, 2)],
        };
        let out = model.attend(&enc, &[1.0, 0.0], &[0.0, 0.0], &[0]).unwrap();
        let e = 1f64.exp();
        assert!((out.weights[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((out.weights[0] - 0.7311).abs() < 1e-4);
        assert_eq!(out.context, vec![out.weights[0], out.weights[1]]);

        // W_α = 0 gives uniform weights; one position gives weight one
        model.params.get_mut(w_alpha).values = vec![0.0; 4];
        let out = model.attend(&enc, &[1.0, 0.0], &[0.0, 0.0], &[0]).unwrap();
        assert_eq!(out.weights, vec![0.5, 0.5]);
        let single = EncoderOutput { steps: 1, states: vec![0.3, -0.2], lengths: vec![1], ..enc };
        let out = model.attend(&single, &[1.0, 0.0], &[0.0, 0.0], &[0]).unwrap();
        assert_eq!(out.weights, vec![1.0]);
        assert_eq!(out.context, vec![0.3, -0.2]);
    }

    #[test]
    fn bahdanau_hand_case() {
        let cfg = ModelConfig {
            encoder_units: 1,
            decoder_units: 1,
            layers_enc: 1,
            layers_dec: 1,
            encoder_type: EncoderType::Lstm,
            attention: AttentionType::Bahdanau,
            embedding_dim: 1,
            ..ModelConfig::default()
        };
        let mut model = Seq2Seq::<f64>::zeroed(cfg, 5).unwrap();
        let set = |m: &mut Seq2Seq<f64>, name: &str, v: f64| {
            let id = m.params.id(name).unwrap();
            m.params.get_mut(id).values = vec![v];
        };
        set(&mut model, "attn.w_key", 2.0);
        set(&mut model, "attn.w_query", 0.5);
        let enc = EncoderOutput {
            batch: 1,
            steps: 2,
            dim: 1,
            states: vec![0.4, -0.3],
            lengths: vec![2],
            final_states: vec![LstmState::zeros(1, 1)],
        };
        let out = model.attend(&enc, &[0.0], &[0.6], &[0]).unwrap();
        assert_eq!(out.weights, vec![0.5, 0.5]);
        set(&mut model, "attn.v", 1.5);
        let out = model.attend(&enc, &[0.0], &[0.6], &[0]).unwrap();
        let e1 = 1.5 * (2.0f64 * 0.4 + 0.5 * 0.6).tanh();
        let e2 = 1.5 * (2.0f64 * -0.3 + 0.5 * 0.6).tanh();
        let want = e1.exp() / (e1.exp() + e2.exp());
        assert!((out.weights[0] - want).abs() < 1e-12);
    }
}
