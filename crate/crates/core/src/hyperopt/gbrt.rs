use serde::{Deserialize, Serialize};

/// Gradient-boosted regression trees with squared-error loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    base: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_trees: 100, max_depth: 3, learning_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Tree {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Tree>, right: Box<Tree> },
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Tree::Leaf(v) => *v,
            Tree::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    /// Greedy CART fit on the rows `idx`.
    fn fit(x: &[Vec<f64>], y: &[f64], idx: &[usize], depth: usize) -> Tree {
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        if depth == 0 || idx.len() < 2 {
            return Tree::Leaf(mean);
        }
        let sse = |s: f64, s2: f64, n: f64| s2 - s * s / n;
        let (tot, tot2) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + y[i], b + y[i] * y[i]));
        let parent = sse(tot, tot2, idx.len() as f64);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x[idx[0]].len() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            let (mut s, mut s2) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let v = y[order[k]];
                s += v;
                s2 += v * v;
                let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (order.len() - k - 1) as f64;
                let cost = sse(s, s2, nl) + sse(tot - s, tot2 - s2, nr);
                if best.is_none_or(|(c, _, _)| cost < c - 1e-12) {
                    best = Some((cost, f, 0.5 * (lo + hi)));
                }
            }
        }
        match best {
            Some((cost, feature, threshold)) if cost < parent - 1e-12 => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
                Tree::Split {
                    feature,
                    threshold,
                    left: Box::new(Tree::fit(x, y, &l, depth - 1)),
                    right: Box::new(Tree::fit(x, y, &r, depth - 1)),
                }
            }
            _ => Tree::Leaf(mean),
        }
    }
}

impl BoostedTrees {
    /// Fits on rows `x` with targets `y`; deterministic for fixed inputs.
    ///
    /// # Panics
    /// If `x` is empty or `x` and `y` differ in length.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: BoostParams) -> Self {
        assert!(!x.is_empty() && x.len() == y.len(), "need matching, non-empty rows and targets");
        let base = y.iter().sum::<f64>() / y.len() as f64;
        let learning_rate = params.learning_rate;
        let mut pred = vec![base; y.len()];
        let idx: Vec<usize> = (0..y.len()).collect();
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            let tree = Tree::fit(x, &residual, &idx, params.max_depth);
            for (p, row) in pred.iter_mut().zip(x) {
                *p += learning_rate * tree.predict(row);
            }
            trees.push(tree);
        }
        BoostedTrees { base, learning_rate, trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = BoostedTrees::fit(&x, &[0.3; 6], BoostParams::default());
        for probe in [[0.0, 0.0], [10.0, -4.0], [2.5, 7.0]] {
            assert!((m.predict(&probe) - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn never_worse_than_the_mean() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 7) as f64, (i / 3) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] * 0.7).sin() + 0.1 * r[1]).collect();
        let m = BoostedTrees::fit(&x, &y, BoostParams::default());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
        let mse = x.iter().zip(&y).map(|(r, v)| (m.predict(r) - v).powi(2)).sum::<f64>() / y.len() as f64;
        assert!(mse <= var && mse < 0.1 * var, "{mse} vs {var}");
    }

    #[test]
    fn monotone_in_one_feature() {
        let levels = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![levels[i % 4], (i / 4) as f64 * 0.1]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let m = BoostedTrees::fit(&x, &y, BoostParams::default());
        let p: Vec<f64> = levels.iter().map(|&l| m.predict(&[l, 0.15])).collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]), "{p:?}");
    }
}
