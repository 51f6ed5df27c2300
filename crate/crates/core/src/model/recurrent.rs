use rand_chacha::ChaCha8Rng;

use crate::numerics::{
    lstm_cell_backward, lstm_cell_forward, CellVariant, Grads, LstmCache, LstmState, LstmWeights, NumericsError,
    ParamStore, Real, StepDropout,
};

/// One LSTM layer unrolled over a padded batch. Rows whose sequence has
/// ended carry their state through unchanged.
pub(crate) struct SeqRun<T> {
    caches: Vec<LstmCache<T>>,
    state_masks: Vec<Option<Vec<T>>>,
    /// Hidden output per time step (rows × units), indexed by time.
    pub outputs: Vec<Vec<T>>,
    pub last: LstmState<T>,
}

fn order(steps: usize, reverse: bool) -> Vec<usize> {
    if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    }
}

fn copy_row<T: Copy>(dst: &mut [T], src: &[T], r: usize, w: usize) {
    dst[r * w..(r + 1) * w].copy_from_slice(&src[r * w..(r + 1) * w]);
}

/// Runs the layer over `inputs[t]` (rows × input) for every step. With
/// `reverse` the steps are visited last to first, so padded tail steps are
/// seen first and leave the initial state untouched.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_sequence<T: Real>(
    params: &ParamStore<T>,
    weights: &LstmWeights,
    variant: CellVariant,
    inputs: &[Vec<T>],
    lens: &[usize],
    reverse: bool,
    init: LstmState<T>,
    state_drop: &mut StepDropout<T>,
    rng: &mut ChaCha8Rng,
) -> Result<SeqRun<T>, NumericsError> {
    let units = weights.units;
    let steps = inputs.len();
    let mut state = init;
    let mut run = SeqRun {
        caches: Vec::with_capacity(steps),
        state_masks: Vec::with_capacity(steps),
        outputs: vec![Vec::new(); steps],
        last: LstmState { h: Vec::new(), c: Vec::new() },
    };
    for t in order(steps, reverse) {
        let mask = state_drop.next(rng).map(|m| m.mask);
        let mut h_in = state.h.clone();
        if let Some(m) = &mask {
            h_in.iter_mut().zip(m).for_each(|(x, k)| *x *= *k);
        }
        let prev = LstmState { h: h_in, c: state.c.clone() };
        let (mut next, cache) = lstm_cell_forward(params, weights, variant, &inputs[t], &prev)?;
        for (r, &len) in lens.iter().enumerate() {
            if t >= len {
                copy_row(&mut next.h, &state.h, r, units);
                copy_row(&mut next.c, &state.c, r, units);
            }
        }
        run.outputs[t] = next.h.clone();
        run.caches.push(cache);
        run.state_masks.push(mask);
        state = next;
    }
    run.last = state;
    Ok(run)
}

/// Backpropagates through a [`SeqRun`]. `d_outputs[t]` is the gradient of
/// the step-`t` output (an empty vector means zero); `d_last` that of the
/// final state. Returns input gradients per step and the gradient of the
/// initial state.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_sequence_backward<T: Real>(
    params: &ParamStore<T>,
    grads: &mut Grads<T>,
    weights: &LstmWeights,
    variant: CellVariant,
    run: &SeqRun<T>,
    lens: &[usize],
    reverse: bool,
    d_outputs: &[Vec<T>],
    d_last: LstmState<T>,
) -> Result<(Vec<Vec<T>>, LstmState<T>), NumericsError> {
    let units = weights.units;
    let steps = run.outputs.len();
    let width = lens.len() * units;
    let mut carry = d_last;
    let mut d_inputs = vec![Vec::new(); steps];
    for (k, &t) in order(steps, reverse).iter().enumerate().rev() {
        let mut dh = carry.h;
        if let Some(d) = d_outputs.get(t).filter(|d| !d.is_empty()) {
            dh.iter_mut().zip(d).for_each(|(a, b)| *a += *b);
        }
        let mut dc = carry.c;
        let ended = lens.iter().any(|&len| t >= len);
        let mut pass = ended.then(|| LstmState::<T>::zeros(lens.len(), units));
        if let Some(p) = pass.as_mut() {
            for (r, &len) in lens.iter().enumerate() {
                if t >= len {
                    copy_row(&mut p.h, &dh, r, units);
                    copy_row(&mut p.c, &dc, r, units);
                    dh[r * units..(r + 1) * units].iter_mut().for_each(|v| *v = T::zero());
                    dc[r * units..(r + 1) * units].iter_mut().for_each(|v| *v = T::zero());
                }
            }
        }
        let (dx, mut dprev) = lstm_cell_backward(params, grads, weights, variant, &run.caches[k], &dh, &dc)?;
        if let Some(m) = &run.state_masks[k] {
            dprev.h.iter_mut().zip(m).for_each(|(x, k)| *x *= *k);
        }
        if let Some(p) = pass {
            dprev.h.iter_mut().zip(&p.h).for_each(|(a, b)| *a += *b);
            dprev.c.iter_mut().zip(&p.c).for_each(|(a, b)| *a += *b);
        }
        debug_assert_eq!(dprev.h.len(), width);
        d_inputs[t] = dx;
        carry = dprev;
    }
    Ok((d_inputs, carry))
}
