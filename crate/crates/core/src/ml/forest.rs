//! Random forest: bagged Gini trees with per-split feature subsampling.

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::ml::tree::{DecisionTree, TreeParams};
use crate::ml::ParamMap;
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    /// Each tree draws a bootstrap sample of size n and considers
    /// ceil(sqrt(d)) random features at every split. Tree t's randomness is
    /// derived from `(seed, t)` so the ensemble is order-independent.
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        params: &ParamMap,
        seed: u64,
    ) -> Result<RandomForest> {
        let tree_params = TreeParams::from_map(params)?;
        let n_estimators = params
            .get("n_estimators")
            .and_then(|v| v.as_usize())
            .unwrap_or(10);
        let n = x.nrows();
        let d = x.ncols();
        let mtry = (d as f64).sqrt().ceil() as usize;
        let mut trees = Vec::with_capacity(n_estimators);
        for t in 0..n_estimators {
            let mut rng = seeded_rng(derive_seed(seed, &[t as u64]));
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let xb = Array2::from_shape_fn((n, d), |(r, c)| x[[rows[r], c]]);
            let yb: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
            let mut sampler = |n_features: usize| sample_features(&mut rng, n_features, mtry);
            trees.push(DecisionTree::fit(
                &xb,
                &yb,
                n_classes,
                &tree_params,
                Some(&mut sampler),
            ));
        }
        Ok(RandomForest { trees, n_classes })
    }

    /// Majority vote; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1;
        }
        let mut best = 0usize;
        for (k, &v) in votes.iter().enumerate().skip(1) {
            if v > votes[best] {
                best = k;
            }
        }
        best
    }
}

/// `mtry` distinct feature indices by partial Fisher-Yates.
fn sample_features(rng: &mut impl Rng, d: usize, mtry: usize) -> Vec<usize> {
    let m = mtry.min(d);
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..m {
        let j = rng.gen_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}
