use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NumericsError, ParamStore, Real};

/// Probability floor applied before taking the log in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max subtraction), in place.
pub fn softmax_in_place<T: Real>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let mut p = z.to_vec();
    softmax_in_place(&mut p);
    p
}

/// `log(softmax(z))` computed in `f64`.
pub fn log_softmax<T: Real>(z: &[T]) -> Vec<f64> {
    let max = z.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|x| (x.f64() - max).exp()).sum::<f64>().ln();
    z.iter().map(|x| x.f64() - lse).collect()
}

/// `-log(max(p[target], floor))`.
pub fn cross_entropy<T: Real>(predicted: &[T], target: usize) -> T {
    -predicted[target].max(T::of(PROB_FLOOR)).ln()
}

/// Scales every gradient so the global L2 norm is at most `max_norm`.
/// Returns the factor applied (1 when no clipping happened).
pub fn clip_gradients<T: Real>(params: &mut ParamStore<T>, max_norm: T) -> Result<T, NumericsError> {
    for t in params.iter() {
        if let Some(i) = t.grad.iter().position(|g| !g.is_finite()) {
            return Err(NumericsError::NonFiniteGradient { parameter: t.name.clone(), index: i });
        }
    }
    let norm = params.grad_norm();
    if norm <= max_norm {
        return Ok(T::one());
    }
    let factor = max_norm / norm;
    for t in params.iter_mut() {
        t.grad.iter_mut().for_each(|g| *g *= factor);
    }
    Ok(factor)
}

/// Plain SGD, `θ ← θ − lr·grad`, then zeroes the gradients. Fails if any
/// updated value is not finite.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, learning_rate: T) -> Result<(), NumericsError> {
    for t in params.iter_mut() {
        for (v, g) in t.values.iter_mut().zip(t.grad.iter_mut()) {
            *v -= learning_rate * *g;
            *g = T::zero();
        }
        if let Some(i) = t.values.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFiniteParameter { parameter: t.name.clone(), index: i });
        }
    }
    Ok(())
}

/// Step decay: the rate is multiplied by `decay` every 3 epochs.
pub fn decay_schedule(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 * decay.powi((epoch / 3) as i32)
}

/// Fills every parameter (biases included) from U[lo, hi).
pub fn init_uniform<T: Real>(params: &mut ParamStore<T>, lo: f64, hi: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.iter_mut() {
        for v in &mut t.values {
            *v = T::of(rng.gen_range(lo..hi));
        }
    }
}

/// Mixes a base seed with stream coordinates (epoch, batch, trial, ...) into
/// an independent seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    let mut z = seed;
    for &c in coords {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(c.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
