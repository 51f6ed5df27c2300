use serde::{Deserialize, Serialize};

use super::{gemm, Grads, NumericsError, ParamId, ParamStore, Real};

/// Which cell output formula to use. `Standard` is `h = o ⊙ tanh(c_t)`;
/// `PreviousCell` is `h = o ⊙ tanh(c_{t-1})`, kept for comparison runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellVariant {
    #[default]
    Standard,
    PreviousCell,
}

/// Fused gate weights of one LSTM cell. Columns of `w`, `u` and `b` are
/// laid out in gate blocks `[i | f | o | g]`, each `units` wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmWeights {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub units: usize,
}

impl LstmWeights {
    /// Registers `{prefix}.w` (input×4H), `{prefix}.u` (H×4H) and
    /// `{prefix}.b` (4H).
    pub fn register<T: Real>(store: &mut ParamStore<T>, prefix: &str, input: usize, units: usize) -> Self {
        LstmWeights {
            w: store.add(format!("{prefix}.w"), &[input, 4 * units]),
            u: store.add(format!("{prefix}.u"), &[units, 4 * units]),
            b: store.add(format!("{prefix}.b"), &[4 * units]),
            input,
            units,
        }
    }
}

/// Hidden and cell state for a batch of rows, each row `units` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(rows: usize, units: usize) -> Self {
        LstmState { h: vec![T::zero(); rows * units], c: vec![T::zero(); rows * units] }
    }

    pub fn select(&self, units: usize, rows: &[usize]) -> Self {
        let pick = |v: &[T]| rows.iter().flat_map(|&r| v[r * units..(r + 1) * units].iter().copied()).collect();
        LstmState { h: pick(&self.h), c: pick(&self.c) }
    }
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    rows: usize,
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates, `[i | f | o | g]` per row.
    gates: Vec<T>,
    /// tanh of the cell value fed into the output gate.
    tanh_c: Vec<T>,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn check(what: &str, expected: usize, found: usize) -> Result<(), NumericsError> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch { what: what.to_string(), expected: vec![expected], found: vec![found] })
    }
}

/// One step for `rows` stacked inputs: `x` is rows×input, `prev` rows×units.
pub fn lstm_cell_forward<T: Real>(
    params: &ParamStore<T>,
    weights: &LstmWeights,
    variant: CellVariant,
    x: &[T],
    prev: &LstmState<T>,
) -> Result<(LstmState<T>, LstmCache<T>), NumericsError> {
    let (n_in, units) = (weights.input, weights.units);
    let rows = prev.h.len() / units.max(1);
    check("lstm input", rows * n_in, x.len())?;
    check("lstm h_prev", rows * units, prev.h.len())?;
    check("lstm c_prev", rows * units, prev.c.len())?;
    let g4 = 4 * units;

    let b = params.value(weights.b);
    let mut gates = Vec::with_capacity(rows * g4);
    for _ in 0..rows {
        gates.extend_from_slice(b);
    }
    gemm(false, false, rows, g4, n_in, T::one(), x, params.value(weights.w), T::one(), &mut gates);
    gemm(false, false, rows, g4, units, T::one(), &prev.h, params.value(weights.u), T::one(), &mut gates);

    let mut h = vec![T::zero(); rows * units];
    let mut c = vec![T::zero(); rows * units];
    let mut tanh_c = vec![T::zero(); rows * units];
    for r in 0..rows {
        let z = &mut gates[r * g4..(r + 1) * g4];
        for v in &mut z[..3 * units] {
            *v = sigmoid(*v);
        }
        for v in &mut z[3 * units..] {
            *v = v.tanh();
        }
        for j in 0..units {
            let k = r * units + j;
            let (i, f, o, g) = (z[j], z[units + j], z[2 * units + j], z[3 * units + j]);
            c[k] = f * prev.c[k] + i * g;
            tanh_c[k] = match variant {
                CellVariant::Standard => c[k].tanh(),
                CellVariant::PreviousCell => prev.c[k].tanh(),
            };
            h[k] = o * tanh_c[k];
        }
    }
    let cache = LstmCache { rows, x: x.to_vec(), h_prev: prev.h.clone(), c_prev: prev.c.clone(), gates, tanh_c };
    Ok((LstmState { h, c }, cache))
}

/// Reverse-mode step. `dh`/`dc` are the upstream gradients of the new
/// state; parameter gradients are added into `grads`. Returns the gradient
/// of the input and of the previous state.
pub fn lstm_cell_backward<T: Real>(
    params: &ParamStore<T>,
    grads: &mut Grads<T>,
    weights: &LstmWeights,
    variant: CellVariant,
    cache: &LstmCache<T>,
    dh: &[T],
    dc: &[T],
) -> Result<(Vec<T>, LstmState<T>), NumericsError> {
    let (n_in, units, rows) = (weights.input, weights.units, cache.rows);
    check("lstm dh", rows * units, dh.len())?;
    check("lstm dc", rows * units, dc.len())?;
    let g4 = 4 * units;
    let one = T::one();

    let mut dz = vec![T::zero(); rows * g4];
    let mut dc_prev = vec![T::zero(); rows * units];
    for r in 0..rows {
        let z = &cache.gates[r * g4..(r + 1) * g4];
        let d = &mut dz[r * g4..(r + 1) * g4];
        for j in 0..units {
            let k = r * units + j;
            let (i, f, o, g) = (z[j], z[units + j], z[2 * units + j], z[3 * units + j]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let through_tanh = dh[k] * o * (one - tc * tc);
            let mut dct = dc[k];
            match variant {
                CellVariant::Standard => dct += through_tanh,
                CellVariant::PreviousCell => dc_prev[k] += through_tanh,
            }
            dc_prev[k] += dct * f;
            d[j] = dct * g * i * (one - i);
            d[units + j] = dct * cache.c_prev[k] * f * (one - f);
            d[2 * units + j] = d_o * o * (one - o);
            d[3 * units + j] = dct * i * (one - g * g);
        }
    }

    gemm(true, false, n_in, g4, rows, one, &cache.x, &dz, one, grads.get_mut(weights.w));
    gemm(true, false, units, g4, rows, one, &cache.h_prev, &dz, one, grads.get_mut(weights.u));
    let db = grads.get_mut(weights.b);
    for r in 0..rows {
        for (acc, v) in db.iter_mut().zip(&dz[r * g4..(r + 1) * g4]) {
            *acc += *v;
        }
    }
    let mut dx = vec![T::zero(); rows * n_in];
    gemm(false, true, rows, n_in, g4, one, &dz, params.value(weights.w), T::zero(), &mut dx);
    let mut dh_prev = vec![T::zero(); rows * units];
    gemm(false, true, rows, units, g4, one, &dz, params.value(weights.u), T::zero(), &mut dh_prev);
    Ok((dx, LstmState { h: dh_prev, c: dc_prev }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, init_uniform, DEFAULT_EPS};

    fn cell(input: usize, units: usize, seed: u64) -> (ParamStore<f64>, LstmWeights) {
        let mut store = ParamStore::new();
        let w = LstmWeights::register(&mut store, "cell", input, units);
        init_uniform(&mut store, -0.5, 0.5, seed);
        (store, w)
    }

    #[test]
    fn zero_params_scalar_case() {
        let mut store = ParamStore::<f64>::new();
        let w = LstmWeights::register(&mut store, "cell", 1, 1);
        let prev = LstmState { h: vec![0.0], c: vec![1.0] };
        let (next, _) = lstm_cell_forward(&store, &w, CellVariant::Standard, &[0.0], &prev).unwrap();
        assert!((next.c[0] - 0.5).abs() < 1e-15);
        assert!((next.h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((next.h[0] - 0.23105).abs() < 1e-5);
        let (zero, _) = lstm_cell_forward(&store, &w, CellVariant::Standard, &[0.0], &LstmState::zeros(1, 1)).unwrap();
        assert_eq!(zero, LstmState::zeros(1, 1));
    }

    #[test]
    fn dimension_mismatch() {
        let (store, w) = cell(3, 2, 0);
        let err = lstm_cell_forward(&store, &w, CellVariant::Standard, &[0.0; 2], &LstmState::zeros(1, 2));
        assert!(matches!(err, Err(NumericsError::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (store, w) = cell(2, 3, 1);
        let prev = LstmState { h: vec![0.1, -0.2, 0.3], c: vec![0.5, 0.0, -1.0] };
        let (_, cache) = lstm_cell_forward(&store, &w, CellVariant::Standard, &[0.4, -0.7], &prev).unwrap();
        let mut grads = store.grads_like();
        let (dx, dprev) =
            lstm_cell_backward(&store, &mut grads, &w, CellVariant::Standard, &cache, &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(dx.iter().chain(&dprev.h).chain(&dprev.c).all(|&v| v == 0.0));
        assert!(grads.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn one_unit_matches_symbolic_derivative() {
        // with scalar weights, dh/dx follows from the chain rule by hand
        let (store, w) = cell(1, 1, 2);
        let p = |id| store.value(id).to_vec();
        let (wv, uv, bv) = (p(w.w), p(w.u), p(w.b));
        let (x, h0, c0) = (0.3, -0.4, 0.8);
        let pre: Vec<f64> = (0..4).map(|k| wv[k] * x + uv[k] * h0 + bv[k]).collect();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (i, f, o, g) = (s(pre[0]), s(pre[1]), s(pre[2]), pre[3].tanh());
        let c = f * c0 + i * g;
        let dc_dx = c0 * f * (1.0 - f) * wv[1] + g * i * (1.0 - i) * wv[0] + i * (1.0 - g * g) * wv[3];
        let want = o * (1.0 - o) * wv[2] * c.tanh() + o * (1.0 - c.tanh().powi(2)) * dc_dx;

        let prev = LstmState { h: vec![h0], c: vec![c0] };
        let (_, cache) = lstm_cell_forward(&store, &w, CellVariant::Standard, &[x], &prev).unwrap();
        let mut grads = store.grads_like();
        let (dx, _) = lstm_cell_backward(&store, &mut grads, &w, CellVariant::Standard, &cache, &[1.0], &[0.0]).unwrap();
        assert!((dx[0] - want).abs() < 1e-12);
    }

    fn check_cell(units: usize, variant: CellVariant) {
        let (mut store, w) = cell(3, units, 3 + units as u64);
        let rows = 2;
        let x: Vec<f64> = (0..rows * 3).map(|k| (k as f64 * 0.9).sin()).collect();
        let prev = LstmState {
            h: (0..rows * units).map(|k| (k as f64 * 1.3).cos() * 0.5).collect(),
            c: (0..rows * units).map(|k| (k as f64 * 0.7).sin()).collect(),
        };
        let coef: Vec<f64> = (0..rows * units).map(|k| 1.0 + k as f64 * 0.25).collect();
        let loss = |s: &ParamStore<f64>| {
            let (next, _) = lstm_cell_forward(s, &w, variant, &x, &prev).unwrap();
            next.h.iter().zip(&next.c).zip(&coef).map(|((h, c), k)| k * h + 0.5 * c * c).sum::<f64>()
        };
        let (next, cache) = lstm_cell_forward(&store, &w, variant, &x, &prev).unwrap();
        let mut grads = store.grads_like();
        lstm_cell_backward(&store, &mut grads, &w, variant, &cache, &coef, &next.c).unwrap();
        let report = grad_check(&mut store, &grads, loss, DEFAULT_EPS, None, 0);
        assert!(report.max_relative_error < 1e-5, "{report:?}");
    }

    #[test]
    fn finite_differences_three_and_four_units() {
        check_cell(3, CellVariant::Standard);
        check_cell(4, CellVariant::Standard);
        check_cell(3, CellVariant::PreviousCell);
    }
}
