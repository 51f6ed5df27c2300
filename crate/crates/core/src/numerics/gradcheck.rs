use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Grads, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|a − n| / max(|a|, |n|, 1e-8)` over the checked coordinates.
    pub max_relative_error: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Default step for [`grad_check`]. With the five-point stencil the
/// truncation error is O(eps⁴) while roundoff stays near ulp(loss)/eps, so a
/// comparatively large step is the accurate choice.
pub const DEFAULT_EPS: f64 = 1e-2;

/// Compares `analytic` against central finite differences of `loss`, using
/// the fourth-order five-point stencil
/// `(8(f(x+ε) − f(x−ε)) − (f(x+2ε) − f(x−2ε))) / 12ε`.
/// Every coordinate is checked unless `max_coords` caps it, in which case a
/// seeded random subset of that size is used. Parameter values are restored
/// afterwards.
pub fn grad_check<F>(
    params: &mut ParamStore<f64>,
    analytic: &Grads<f64>,
    loss: F,
    eps: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&ParamStore<f64>) -> f64,
{
    let coords: Vec<(usize, usize)> =
        params.iter().enumerate().flat_map(|(t, p)| (0..p.len()).map(move |i| (t, i))).collect();
    let chosen: Vec<usize> = match max_coords {
        Some(k) if k < coords.len() => {
            let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), coords.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..coords.len()).collect(),
    };

    let ids: Vec<_> = params.iter().map(|t| params.id(&t.name).expect("registered")).collect();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: None, coords_checked: chosen.len() };
    for c in chosen {
        let (t, i) = coords[c];
        let id = ids[t];
        let orig = params.value(id)[i];
        let mut at = |x: f64| {
            params.get_mut(id).values[i] = x;
            loss(params)
        };
        let near = at(orig + eps) - at(orig - eps);
        let far = at(orig + 2.0 * eps) - at(orig - 2.0 * eps);
        params.get_mut(id).values[i] = orig;

        let n = (8.0 * near - far) / (12.0 * eps);
        let a = analytic.get(id)[i];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        if report.worst.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = Some((params.get(id).name.clone(), i));
        }
    }
    report
}
