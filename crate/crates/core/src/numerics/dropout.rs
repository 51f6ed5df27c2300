use rand::Rng;

use super::Real;

/// Inverted-dropout mask: entries are 0 or `1/keep_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    pub keep_prob: f64,
    pub mask: Vec<T>,
    /// When set, the same mask is reused at every time step of a sequence.
    pub variational: bool,
}

impl<T: Real> DropoutMask<T> {
    pub fn ones(len: usize) -> Self {
        DropoutMask { keep_prob: 1.0, mask: vec![T::one(); len], variational: true }
    }

    pub fn apply(&self, x: &mut [T]) {
        for (v, m) in x.iter_mut().zip(&self.mask) {
            *v *= *m;
        }
    }
}

pub fn make_dropout_mask<T: Real, R: Rng + ?Sized>(len: usize, keep_prob: f64, variational: bool, rng: &mut R) -> DropoutMask<T> {
    assert!(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must be in (0, 1]");
    let mask = if keep_prob >= 1.0 {
        vec![T::one(); len]
    } else {
        let scale = T::of(1.0 / keep_prob);
        (0..len).map(|_| if rng.gen::<f64>() < keep_prob { scale } else { T::zero() }).collect()
    };
    DropoutMask { keep_prob, mask, variational }
}

/// Hands out one mask per time step: either a fresh draw each step or, in
/// variational mode, the same mask for the whole sequence. With
/// `keep_prob == 1` no masks are produced at all.
#[derive(Debug, Clone)]
pub struct StepDropout<T> {
    keep_prob: f64,
    variational: bool,
    len: usize,
    shared: Option<DropoutMask<T>>,
}

impl<T: Real> StepDropout<T> {
    pub fn new(len: usize, keep_prob: f64, variational: bool) -> Self {
        StepDropout { keep_prob, variational, len, shared: None }
    }

    pub fn disabled() -> Self {
        StepDropout::new(0, 1.0, true)
    }

    pub fn is_active(&self) -> bool {
        self.keep_prob < 1.0
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<DropoutMask<T>> {
        if !self.is_active() {
            return None;
        }
        if self.variational {
            let len = self.len;
            let keep = self.keep_prob;
            Some(self.shared.get_or_insert_with(|| make_dropout_mask(len, keep, true, rng)).clone())
        } else {
            Some(make_dropout_mask(self.len, self.keep_prob, false, rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn keep_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m: DropoutMask<f32> = make_dropout_mask(10, 1.0, false, &mut rng);
        assert!(m.mask.iter().all(|&v| v == 1.0));
        assert!(StepDropout::<f32>::new(10, 1.0, false).next(&mut rng).is_none());
    }

    #[test]
    fn expectation_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m: DropoutMask<f64> = make_dropout_mask(100_000, 0.7, false, &mut rng);
        let mean = m.mask.iter().sum::<f64>() / 1e5;
        // each entry has variance (1 - p) / p
        let sigma = (0.3f64 / 0.7).sqrt() / 1e5f64.sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma);
        assert!(m.mask.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-15));
    }

    #[test]
    fn variational_reuses_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut steps = StepDropout::<f32>::new(64, 0.5, true);
        let first = steps.next(&mut rng).unwrap();
        for _ in 0..5 {
            assert_eq!(steps.next(&mut rng).unwrap().mask, first.mask);
        }
        let mut fresh = StepDropout::<f32>::new(64, 0.5, false);
        let a = fresh.next(&mut rng).unwrap();
        let b = fresh.next(&mut rng).unwrap();
        assert_ne!(a.mask, b.mask);
    }
}
