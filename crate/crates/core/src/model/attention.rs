use crate::numerics::{gemm, Grads, ParamId, ParamStore, Real};

use super::EncoderOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AttnParams {
    /// Bilinear score `s·W_α·h_t`; `w_alpha` is H×d.
    Luong { w_alpha: ParamId },
    /// Additive score `v·tanh(h_t W_key + s_prev W_query)`.
    Bahdanau { w_key: ParamId, w_query: ParamId, v: ParamId },
}

/// Forward values of one attention call over `rows` decoder rows; row `r`
/// attends over the encoder states of example `row_ex[r]`.
pub(crate) struct AttnCache<T> {
    rows: usize,
    row_ex: Vec<usize>,
    s: Vec<T>,
    s_prev: Vec<T>,
    q: Vec<T>,
    keys: Vec<T>,
    act: Vec<T>,
    /// rows × steps; exactly zero beyond each source length.
    pub alpha: Vec<T>,
    pub ctx: Vec<T>,
    cat: Vec<T>,
    /// rows × H attention vectors `tanh([c; s] W_a)`.
    pub vector: Vec<T>,
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * k + j] * b[4 * k + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * *b;
    }
}

/// Softmax over the valid prefix of `e`; the rest is set to exactly zero.
fn masked_softmax<T: Real>(e: &mut [T], len: usize) {
    let max = e[..len].iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in &mut e[..len] {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in &mut e[..len] {
        *x /= sum;
    }
    e[len..].iter_mut().for_each(|x| *x = T::zero());
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_forward<T: Real>(
    params: &ParamStore<T>,
    kind: AttnParams,
    w_a: ParamId,
    enc: &EncoderOutput<T>,
    s: &[T],
    s_prev: &[T],
    row_ex: &[usize],
    hidden: usize,
) -> AttnCache<T> {
    let rows = row_ex.len();
    let (steps, d) = (enc.steps, enc.dim);
    let state = |b: usize, t: usize| &enc.states[(b * steps + t) * d..(b * steps + t + 1) * d];
    let mut alpha = vec![T::zero(); rows * steps];
    let (mut q, mut keys, mut act) = (Vec::new(), Vec::new(), Vec::new());

    match kind {
        AttnParams::Luong { w_alpha } => {
            q = vec![T::zero(); rows * d];
            gemm(false, false, rows, d, hidden, T::one(), s, params.value(w_alpha), T::zero(), &mut q);
            for (r, &b) in row_ex.iter().enumerate() {
                let qr = &q[r * d..(r + 1) * d];
                let e = &mut alpha[r * steps..(r + 1) * steps];
                for (t, x) in e.iter_mut().enumerate().take(enc.lengths[b]) {
                    *x = dot(qr, state(b, t));
                }
                masked_softmax(e, enc.lengths[b]);
            }
        }
        AttnParams::Bahdanau { w_key, w_query, v } => {
            let n = enc.batch * steps;
            keys = vec![T::zero(); n * hidden];
            gemm(false, false, n, hidden, d, T::one(), &enc.states, params.value(w_key), T::zero(), &mut keys);
            let mut u = vec![T::zero(); rows * hidden];
            gemm(false, false, rows, hidden, hidden, T::one(), s_prev, params.value(w_query), T::zero(), &mut u);
            let v = params.value(v);
            act = vec![T::zero(); rows * steps * hidden];
            for (r, &b) in row_ex.iter().enumerate() {
                let ur = &u[r * hidden..(r + 1) * hidden];
                let e = &mut alpha[r * steps..(r + 1) * steps];
                for (t, x) in e.iter_mut().enumerate().take(enc.lengths[b]) {
                    let k = &keys[(b * steps + t) * hidden..(b * steps + t + 1) * hidden];
                    let a = &mut act[(r * steps + t) * hidden..(r * steps + t + 1) * hidden];
                    for j in 0..hidden {
                        a[j] = (k[j] + ur[j]).tanh();
                    }
                    *x = dot(v, a);
                }
                masked_softmax(e, enc.lengths[b]);
            }
        }
    }

    let mut ctx = vec![T::zero(); rows * d];
    let cw = d + hidden;
    let mut cat = vec![T::zero(); rows * cw];
    for (r, &b) in row_ex.iter().enumerate() {
        let c = &mut ctx[r * d..(r + 1) * d];
        for t in 0..enc.lengths[b] {
            axpy(c, alpha[r * steps + t], state(b, t));
        }
        cat[r * cw..r * cw + d].copy_from_slice(c);
        cat[r * cw + d..(r + 1) * cw].copy_from_slice(&s[r * hidden..(r + 1) * hidden]);
    }
    let mut vector = vec![T::zero(); rows * hidden];
    gemm(false, false, rows, hidden, cw, T::one(), &cat, params.value(w_a), T::zero(), &mut vector);
    vector.iter_mut().for_each(|x| *x = x.tanh());

    AttnCache {
        rows,
        row_ex: row_ex.to_vec(),
        s: s.to_vec(),
        s_prev: s_prev.to_vec(),
        q,
        keys,
        act,
        alpha,
        ctx,
        cat,
        vector,
    }
}

/// Returns gradients of `s`, `s_prev` (zero for Luong) and the encoder
/// states (batch × steps × d), adding parameter gradients into `grads`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward<T: Real>(
    params: &ParamStore<T>,
    grads: &mut Grads<T>,
    kind: AttnParams,
    w_a: ParamId,
    enc: &EncoderOutput<T>,
    cache: &AttnCache<T>,
    d_vector: &[T],
    hidden: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = cache.rows;
    let (steps, d) = (enc.steps, enc.dim);
    let cw = d + hidden;
    let one = T::one();
    let at = |b: usize, t: usize| (b * steps + t) * d;

    let mut dz = d_vector.to_vec();
    for (g, v) in dz.iter_mut().zip(&cache.vector) {
        *g *= one - *v * *v;
    }
    gemm(true, false, cw, hidden, rows, one, &cache.cat, &dz, one, grads.get_mut(w_a));
    let mut dcat = vec![T::zero(); rows * cw];
    gemm(false, true, rows, cw, hidden, one, &dz, params.value(w_a), T::zero(), &mut dcat);

    let mut ds = vec![T::zero(); rows * hidden];
    let mut d_states = vec![T::zero(); enc.states.len()];
    let mut de = vec![T::zero(); rows * steps];
    for (r, &b) in cache.row_ex.iter().enumerate() {
        ds[r * hidden..(r + 1) * hidden].copy_from_slice(&dcat[r * cw + d..(r + 1) * cw]);
        let dctx = &dcat[r * cw..r * cw + d];
        let alpha = &cache.alpha[r * steps..(r + 1) * steps];
        let len = enc.lengths[b];
        let dalpha: Vec<T> = (0..len).map(|t| dot(dctx, &enc.states[at(b, t)..at(b, t) + d])).collect();
        let mean: T = (0..len).map(|t| alpha[t] * dalpha[t]).sum();
        for t in 0..len {
            axpy(&mut d_states[at(b, t)..at(b, t) + d], alpha[t], dctx);
            de[r * steps + t] = alpha[t] * (dalpha[t] - mean);
        }
    }

    let mut ds_prev = vec![T::zero(); rows * hidden];
    match kind {
        AttnParams::Luong { w_alpha } => {
            let mut dq = vec![T::zero(); rows * d];
            for (r, &b) in cache.row_ex.iter().enumerate() {
                let qr = &cache.q[r * d..(r + 1) * d];
                let dqr = &mut dq[r * d..(r + 1) * d];
                for t in 0..enc.lengths[b] {
                    let g = de[r * steps + t];
                    axpy(dqr, g, &enc.states[at(b, t)..at(b, t) + d]);
                    axpy(&mut d_states[at(b, t)..at(b, t) + d], g, qr);
                }
            }
            gemm(true, false, hidden, d, rows, one, &cache.s, &dq, one, grads.get_mut(w_alpha));
            gemm(false, true, rows, hidden, d, one, &dq, params.value(w_alpha), one, &mut ds);
        }
        AttnParams::Bahdanau { w_key, w_query, v } => {
            let n = enc.batch * steps;
            let mut dkeys = vec![T::zero(); n * hidden];
            let mut du = vec![T::zero(); rows * hidden];
            let mut dv = vec![T::zero(); hidden];
            let vv = params.value(v);
            let mut g = vec![T::zero(); hidden];
            for (r, &b) in cache.row_ex.iter().enumerate() {
                for t in 0..enc.lengths[b] {
                    let e = de[r * steps + t];
                    let a = &cache.act[(r * steps + t) * hidden..(r * steps + t + 1) * hidden];
                    for j in 0..hidden {
                        g[j] = e * vv[j] * (one - a[j] * a[j]);
                    }
                    axpy(&mut dv, e, a);
                    axpy(&mut dkeys[(b * steps + t) * hidden..(b * steps + t + 1) * hidden], one, &g);
                    axpy(&mut du[r * hidden..(r + 1) * hidden], one, &g);
                }
            }
            axpy(grads.get_mut(v), one, &dv);
            gemm(true, false, d, hidden, n, one, &enc.states, &dkeys, one, grads.get_mut(w_key));
            gemm(false, true, n, d, hidden, one, &dkeys, params.value(w_key), one, &mut d_states);
            gemm(true, false, hidden, hidden, rows, one, &cache.s_prev, &du, one, grads.get_mut(w_query));
            gemm(false, true, rows, hidden, hidden, one, &du, params.value(w_query), T::zero(), &mut ds_prev);
            debug_assert!(cache.keys.len() == n * hidden);
        }
    }
    (ds, ds_prev, d_states)
}
