//! CART-style decision tree with Gini impurity.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ml::ParamMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl TreeParams {
    pub fn from_map(params: &ParamMap) -> Result<TreeParams> {
        Ok(TreeParams {
            max_depth: params
                .get("max_depth")
                .and_then(|v| v.as_usize())
                .ok_or_else(|| Error::InvalidInput("max_depth must be a non-negative int".into()))?,
            min_samples_split: params
                .get("min_samples_split")
                .and_then(|v| v.as_usize())
                .ok_or_else(|| Error::InvalidInput("min_samples_split must be an int".into()))?,
            min_samples_leaf: params
                .get("min_samples_leaf")
                .and_then(|v| v.as_usize())
                .ok_or_else(|| Error::InvalidInput("min_samples_leaf must be an int".into()))?,
        })
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Either all features or a per-node random subset (used by random forests).
pub(crate) type FeatureSampler<'a> = &'a mut dyn FnMut(usize) -> Vec<usize>;

#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    pub n_classes: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0usize;
    let mut best_c = counts[0];
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > best_c {
            best_c = c;
            best = k;
        }
    }
    best
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl DecisionTree {
    /// Grows a tree on the given rows. `sampler`, when provided, picks the
    /// candidate feature subset at every split node.
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        params: &TreeParams,
        mut sampler: Option<FeatureSampler<'_>>,
    ) -> DecisionTree {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_classes,
        };
        tree.grow(x, y, rows, 0, params, &mut sampler);
        tree
    }

    fn grow(
        &mut self,
        x: &Array2<f64>,
        y: &[usize],
        rows: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        sampler: &mut Option<FeatureSampler<'_>>,
    ) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[y[r]] += 1;
        }
        let node_gini = gini(&counts, rows.len());
        let make_leaf = depth >= params.max_depth
            || rows.len() < params.min_samples_split
            || node_gini == 0.0;
        if !make_leaf {
            if let Some(split) = self.best_split(x, y, &rows, &counts, params, sampler) {
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &r in &rows {
                    if x[[r, split.feature]] <= split.threshold {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
                let idx = self.nodes.len();
                self.nodes.push(Node::Leaf { class: 0 }); // placeholder
                let left = self.grow(x, y, left_rows, depth + 1, params, sampler);
                let right = self.grow(x, y, right_rows, depth + 1, params, sampler);
                self.nodes[idx] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                return idx;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        idx
    }

    /// Minimum weighted child Gini over candidate features/thresholds; ties
    /// resolve to the lower feature index, then the lower threshold (both
    /// guaranteed by scan order with strict improvement).
    fn best_split(
        &self,
        x: &Array2<f64>,
        y: &[usize],
        rows: &[usize],
        counts: &[usize],
        params: &TreeParams,
        sampler: &mut Option<FeatureSampler<'_>>,
    ) -> Option<BestSplit> {
        let d = x.ncols();
        let features: Vec<usize> = match sampler {
            Some(f) => {
                let mut v = f(d);
                v.sort_unstable();
                v
            }
            None => (0..d).collect(),
        };
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<usize> = rows.to_vec();
        let mut left_counts = vec![0usize; self.n_classes];
        for &feat in &features {
            order.sort_by(|&a, &b| x[[a, feat]].partial_cmp(&x[[b, feat]]).unwrap());
            left_counts.iter_mut().for_each(|c| *c = 0);
            let mut left_n = 0usize;
            for w in 0..n - 1 {
                let r = order[w];
                left_counts[y[r]] += 1;
                left_n += 1;
                let v_here = x[[r, feat]];
                let v_next = x[[order[w + 1], feat]];
                if v_next <= v_here {
                    continue; // no threshold separates equal values
                }
                let right_n = n - left_n;
                if left_n < params.min_samples_leaf || right_n < params.min_samples_leaf {
                    continue;
                }
                let right_counts: Vec<usize> = counts
                    .iter()
                    .zip(&left_counts)
                    .map(|(&t, &l)| t - l)
                    .collect();
                let impurity = (left_n as f64 * gini(&left_counts, left_n)
                    + right_n as f64 * gini(&right_counts, right_n))
                    / n as f64;
                let threshold = v_here + (v_next - v_here) / 2.0;
                let better = match &best {
                    None => true,
                    Some(b) => impurity < b.impurity - 1e-15,
                };
                if better {
                    best = Some(BestSplit {
                        feature: feat,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn params(depth: usize, split: usize, leaf: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_split: split,
            min_samples_leaf: leaf,
        }
    }

    #[test]
    fn single_threshold_problem() {
        let x = array![[1.0], [2.0], [3.0], [10.0], [11.0], [12.0]];
        let y = vec![0, 0, 0, 1, 1, 1];
        let tree = DecisionTree::fit(&x, &y, 2, &params(5, 2, 1), None);
        assert_eq!(tree.predict(&[2.5]), 0);
        assert_eq!(tree.predict(&[9.0]), 1);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn respects_max_depth() {
        let mut rng = crate::rng::seeded_rng(2);
        use rand::Rng;
        let x = Array2::from_shape_fn((64, 3), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..64).map(|_| rng.gen_range(0..3)).collect();
        let tree = DecisionTree::fit(&x, &y, 3, &params(2, 2, 1), None);
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn min_leaf_prevents_tiny_children() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]];
        let y = vec![0, 1, 1, 1, 1, 1];
        // a split isolating row 0 would leave one sample on the left
        let tree = DecisionTree::fit(&x, &y, 2, &params(5, 2, 2), None);
        assert_ne!(tree.predict(&[1.0]), 0, "leaf below min_samples_leaf");
    }

    #[test]
    fn tie_breaks_toward_lower_feature() {
        // both features split perfectly; feature 0 must win
        let x = array![[0.0, 0.0], [0.1, 0.1], [1.0, 1.0], [1.1, 1.1]];
        let y = vec![0, 0, 1, 1];
        let tree = DecisionTree::fit(&x, &y, 2, &params(3, 2, 1), None);
        match &tree.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            _ => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn pure_node_is_leaf() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = vec![1, 1, 1];
        let tree = DecisionTree::fit(&x, &y, 2, &params(5, 2, 1), None);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[99.0]), 1);
    }
}
