//! One-vs-rest ridge least-squares linear classifier.
//!
//! This is the workhorse behind recursive feature elimination (per-feature
//! importance = sum of squared weights across classes) and the fast scorer
//! option for forward selection. Closed form, no randomness.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct LinearOvr {
    /// features x classes
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
}

impl LinearOvr {
    /// Ridge fit against +/-1 one-vs-rest targets, with centered features so
    /// the bias absorbs the means and stays out of the weight ranking.
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize, lambda: f64) -> Result<LinearOvr> {
        let n = x.nrows();
        let d = x.ncols();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} targets",
                n,
                y.len()
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
        }
        let mut x_mean = vec![0.0f64; d];
        for r in 0..n {
            for c in 0..d {
                x_mean[c] += x[[r, c]];
            }
        }
        for m in x_mean.iter_mut() {
            *m /= n as f64;
        }
        let xc = DMatrix::from_fn(n, d, |r, c| x[[r, c]] - x_mean[c]);
        let mut targets = DMatrix::<f64>::zeros(n, n_classes);
        let mut y_mean = vec![0.0f64; n_classes];
        for (r, &cls) in y.iter().enumerate() {
            for c in 0..n_classes {
                let t = if cls == c { 1.0 } else { -1.0 };
                targets[(r, c)] = t;
                y_mean[c] += t;
            }
        }
        for m in y_mean.iter_mut() {
            *m /= n as f64;
        }
        for r in 0..n {
            for c in 0..n_classes {
                targets[(r, c)] -= y_mean[c];
            }
        }

        let w = if d <= n {
            // primal: (X'X + lambda I)^-1 X'Y
            let mut gram = xc.transpose() * &xc;
            for i in 0..d {
                gram[(i, i)] += lambda;
            }
            let rhs = xc.transpose() * &targets;
            gram.cholesky()
                .ok_or_else(|| Error::Numerical("singular ridge system".into()))?
                .solve(&rhs)
        } else {
            // dual: X' (X X' + lambda I)^-1 Y
            let mut gram = &xc * xc.transpose();
            for i in 0..n {
                gram[(i, i)] += lambda;
            }
            let alpha = gram
                .cholesky()
                .ok_or_else(|| Error::Numerical("singular ridge system".into()))?
                .solve(&targets);
            xc.transpose() * alpha
        };

        let weights = Array2::from_shape_fn((d, n_classes), |(i, j)| w[(i, j)]);
        let bias: Vec<f64> = (0..n_classes)
            .map(|c| {
                let mut b = y_mean[c];
                for i in 0..d {
                    b -= weights[[i, c]] * x_mean[i];
                }
                b
            })
            .collect();
        Ok(LinearOvr { weights, bias })
    }

    pub fn decision(&self, x: &[f64], class: usize) -> f64 {
        let mut acc = self.bias[class];
        for (i, &v) in x.iter().enumerate() {
            acc += self.weights[[i, class]] * v;
        }
        acc
    }

    /// Predicted class index; ties resolve to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let k = self.bias.len();
        let mut best = 0usize;
        let mut best_v = self.decision(x, 0);
        for c in 1..k {
            let v = self.decision(x, c);
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        best
    }

    /// Per-feature importance: sum of squared weights across classes.
    pub fn importance(&self) -> Vec<f64> {
        let (d, k) = self.weights.dim();
        (0..d)
            .map(|i| (0..k).map(|c| self.weights[[i, c]].powi(2)).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_shifted_classes() {
        let n = 30;
        let mut x = Array2::<f64>::zeros((n, 3));
        let mut y = Vec::with_capacity(n);
        let mut rng = crate::rng::seeded_rng(3);
        use rand::Rng;
        for r in 0..n {
            let cls = r % 3;
            x[[r, 0]] = cls as f64 * 2.0 + rng.gen_range(-0.3..0.3);
            x[[r, 1]] = rng.gen_range(-1.0..1.0);
            x[[r, 2]] = rng.gen_range(-1.0..1.0);
            y.push(cls);
        }
        let model = LinearOvr::fit(&x, &y, 3, 1e-3).unwrap();
        let mut hits = 0;
        for r in 0..n {
            if model.predict(&x.row(r).to_vec()) == y[r] {
                hits += 1;
            }
        }
        assert!(hits as f64 / n as f64 >= 0.9, "hits {hits}/{n}");
        // the informative feature dominates the importance ranking
        let imp = model.importance();
        assert!(imp[0] > imp[1] && imp[0] > imp[2], "{imp:?}");
    }

    #[test]
    fn dual_and_primal_paths_agree() {
        let mut rng = crate::rng::seeded_rng(8);
        use rand::Rng;
        // n > d exercises the primal path; slice to n < d for the dual
        let x = Array2::from_shape_fn((20, 5), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..20).map(|r| (r / 10) % 2).collect();
        let primal = LinearOvr::fit(&x, &y, 2, 0.5).unwrap();
        let x_wide = Array2::from_shape_fn((4, 6), |_| rng.gen_range(-1.0..1.0));
        let y_wide = vec![0, 1, 0, 1];
        let dual = LinearOvr::fit(&x_wide, &y_wide, 2, 0.5).unwrap();
        // smoke: both paths produce finite weights of the right shape
        assert_eq!(primal.weights.dim(), (5, 2));
        assert_eq!(dual.weights.dim(), (6, 2));
        assert!(primal.weights.iter().chain(dual.weights.iter()).all(|v| v.is_finite()));
    }
}
