//! Feature-subset selection: greedy forward selection scored by
//! cross-validated accuracy, and recursive elimination ranked by linear
//! one-vs-rest weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::ml::cv::repeated_stratified_kfold;
use crate::ml::linear::{LinearOvr, DEFAULT_RIDGE_LAMBDA};
use crate::ml::{train, ModelFamily, ParamMap};
use crate::rng::derive_seed;

/// Improvement below which a full forward-selection round counts as "no
/// longer increasing" and the search stops.
pub const FFS_MIN_IMPROVEMENT: f64 = 1e-12;

/// Folds used by the forward-selection scorer.
pub const FFS_SCORER_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Ffs,
    Rfe,
}

impl SelectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorKind::Ffs => "ffs",
            SelectorKind::Rfe => "rfe",
        }
    }

    pub fn parse(s: &str) -> Result<SelectorKind> {
        match s {
            "ffs" => Ok(SelectorKind::Ffs),
            "rfe" => Ok(SelectorKind::Rfe),
            other => Err(Error::InvalidInput(format!("unknown selector {other:?}"))),
        }
    }
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What scores a candidate subset during forward selection.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    /// Ridge one-vs-rest linear classifier (fast closed form).
    Linear { lambda: f64 },
    /// One of the four classifier families with explicit hyperparameters.
    Model { family: ModelFamily, params: ParamMap },
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec::Linear {
            lambda: DEFAULT_RIDGE_LAMBDA,
        }
    }
}

/// A complete selection request.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorSpec {
    pub kind: SelectorKind,
    pub k: usize,
    pub scorer: ScorerSpec,
    pub ridge_lambda: f64,
}

impl SelectorSpec {
    pub fn new(kind: SelectorKind, k: usize) -> Self {
        SelectorSpec {
            kind,
            k,
            scorer: ScorerSpec::default(),
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
        }
    }

    pub fn select(&self, data: &Dataset, seed: u64) -> Result<Vec<usize>> {
        match self.kind {
            SelectorKind::Ffs => forward_feature_selection(data, self.k, &self.scorer, seed),
            SelectorKind::Rfe => recursive_feature_elimination(data, self.k, self.ridge_lambda),
        }
    }
}

fn check_selection_args(data: &Dataset, k: usize) -> Result<()> {
    data.validate()?;
    if k == 0 || k > data.n_features() {
        return Err(Error::InvalidInput(format!(
            "k = {k} must lie in 1..={}",
            data.n_features()
        )));
    }
    if data.classes_present().len() < 2 {
        return Err(Error::InvalidInput(
            "degenerate dataset: a single class is present".into(),
        ));
    }
    Ok(())
}

/// Mean accuracy (fraction) of the scorer over fixed stratified folds,
/// restricted to the candidate columns.
fn score_subset(
    data: &Dataset,
    cols: &[usize],
    scorer: &ScorerSpec,
    splits: &[crate::ml::cv::Split],
    seed: u64,
) -> Result<f64> {
    let reduced = data.select_features(cols);
    let mut acc = 0.0;
    for (f, split) in splits.iter().enumerate() {
        let train_data = reduced.select_rows(&split.train);
        let test_data = reduced.select_rows(&split.test);
        let hits = match scorer {
            ScorerSpec::Linear { lambda } => {
                let classes = train_data.classes_present();
                if classes.len() < 2 {
                    return Err(Error::InvalidInput(
                        "fold lost all but one class; cannot score".into(),
                    ));
                }
                let y: Vec<usize> = train_data
                    .labels
                    .iter()
                    .map(|l| classes.iter().position(|c| c == l).unwrap())
                    .collect();
                let model = LinearOvr::fit(&train_data.features, &y, classes.len(), *lambda)?;
                (0..test_data.n_rows())
                    .filter(|&r| {
                        let pred = model.predict(&test_data.features.row(r).to_vec());
                        classes[pred] == test_data.labels[r]
                    })
                    .count()
            }
            ScorerSpec::Model { family, params } => {
                let model = train(
                    *family,
                    params,
                    &train_data,
                    derive_seed(seed, &[f as u64]),
                )?;
                (0..test_data.n_rows())
                    .filter(|&r| {
                        model.predict_row(&test_data.features.row(r).to_vec())
                            == test_data.labels[r]
                    })
                    .count()
            }
        };
        acc += hits as f64 / test_data.n_rows().max(1) as f64;
    }
    Ok(acc / splits.len() as f64)
}

/// Greedy forward selection: adds the feature with the greatest
/// cross-validated accuracy improvement each round, stopping at `k` features
/// or when a full round improves by less than [`FFS_MIN_IMPROVEMENT`].
/// Returns indices in selection order. Ties resolve to the lowest index.
pub fn forward_feature_selection(
    data: &Dataset,
    k: usize,
    scorer: &ScorerSpec,
    seed: u64,
) -> Result<Vec<usize>> {
    check_selection_args(data, k)?;
    // folds are fixed once so every candidate faces the same partition
    let splits = repeated_stratified_kfold(
        &data.labels,
        FFS_SCORER_FOLDS,
        1,
        derive_seed(seed, &[0xf5]),
    )?;
    let d = data.n_features();
    let mut selected: Vec<usize> = Vec::new();
    let mut in_set = vec![false; d];
    let mut current = f64::NEG_INFINITY;
    while selected.len() < k {
        let candidates: Vec<usize> = (0..d).filter(|&j| !in_set[j]).collect();
        let scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&j| {
                let mut cols = selected.clone();
                cols.push(j);
                cols.sort_unstable();
                let s = score_subset(data, &cols, scorer, &splits, derive_seed(seed, &[j as u64]))
                    .unwrap_or(f64::NEG_INFINITY);
                (j, s)
            })
            .collect();
        let mut best_j = usize::MAX;
        let mut best_s = f64::NEG_INFINITY;
        for &(j, s) in &scored {
            if s > best_s || (s == best_s && j < best_j) {
                best_s = s;
                best_j = j;
            }
        }
        if best_j == usize::MAX {
            break;
        }
        if !selected.is_empty() && best_s - current < FFS_MIN_IMPROVEMENT {
            break;
        }
        selected.push(best_j);
        in_set[best_j] = true;
        current = best_s;
    }
    Ok(selected)
}

/// Recursive feature elimination: repeatedly drops the feature with the
/// smallest linear one-vs-rest importance (sum of squared class weights),
/// one per iteration, until `k` remain. Ties remove the higher index.
/// Returns the surviving indices in ascending order. Fully deterministic.
pub fn recursive_feature_elimination(
    data: &Dataset,
    k: usize,
    ridge_lambda: f64,
) -> Result<Vec<usize>> {
    check_selection_args(data, k)?;
    let classes = data.classes_present();
    let y: Vec<usize> = data
        .labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let mut remaining: Vec<usize> = (0..data.n_features()).collect();
    while remaining.len() > k {
        let x = data.select_features(&remaining).features;
        let model = LinearOvr::fit(&x, &y, classes.len(), ridge_lambda)?;
        let importance = model.importance();
        let mut drop_pos = 0usize;
        for (pos, &imp) in importance.iter().enumerate() {
            // <= sends ties to the higher original index (later position)
            if imp <= importance[drop_pos] {
                drop_pos = pos;
            }
        }
        remaining.remove(drop_pos);
    }
    Ok(remaining)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::Metric;
    use crate::features::{ClassLabel, FeatureId};
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// `n_informative` features carry class-dependent means of strength
    /// `delta`; the rest are pure noise.
    pub(crate) fn informative_fixture(
        rows_per_class: usize,
        n_features: usize,
        informative: &[usize],
        delta: f64,
        seed: u64,
    ) -> Dataset {
        let mut rng = crate::rng::seeded_rng(seed);
        let n = rows_per_class * 3;
        // per (class, informative feature) mean pattern in {-delta, 0, +delta},
        // guaranteed non-constant across classes
        let mut patterns: Vec<[f64; 3]> = Vec::with_capacity(informative.len());
        for _ in informative {
            loop {
                let p = [
                    (rng.gen_range(0..3) as f64 - 1.0) * delta,
                    (rng.gen_range(0..3) as f64 - 1.0) * delta,
                    (rng.gen_range(0..3) as f64 - 1.0) * delta,
                ];
                if p[0] != p[1] || p[1] != p[2] {
                    patterns.push(p);
                    break;
                }
            }
        }
        let mut features = Array2::<f64>::zeros((n, n_features));
        let mut labels = Vec::with_capacity(n);
        for r in 0..n {
            let cls = r / rows_per_class;
            labels.push(ClassLabel::from_index(cls).unwrap());
            for c in 0..n_features {
                let mut v: f64 = rng.sample(StandardNormal);
                if let Some(pos) = informative.iter().position(|&f| f == c) {
                    v += patterns[pos][cls];
                }
                features[[r, c]] = v;
            }
        }
        let ids = (0..n_features)
            .map(|i| FeatureId {
                metric: Metric::Pdc,
                source: format!("s{i}"),
                target: format!("t{i}"),
            })
            .collect();
        Dataset::new(features, labels, ids, Vec::new()).unwrap()
    }

    #[test]
    fn rfe_keeps_everything_when_k_is_full() {
        let data = informative_fixture(10, 12, &[3, 7], 2.0, 1);
        let got = recursive_feature_elimination(&data, 12, DEFAULT_RIDGE_LAMBDA).unwrap();
        assert_eq!(got, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn rfe_finds_the_informative_features() {
        let informative = [5, 17, 29];
        let data = informative_fixture(12, 40, &informative, 2.0, 2);
        let got = recursive_feature_elimination(&data, 3, DEFAULT_RIDGE_LAMBDA).unwrap();
        assert_eq!(got, informative.to_vec());
    }

    #[test]
    fn ffs_selects_the_single_informative_feature_first() {
        let data = informative_fixture(12, 25, &[13], 3.0, 3);
        let got =
            forward_feature_selection(&data, 3, &ScorerSpec::default(), 5).unwrap();
        assert_eq!(got[0], 13, "first pick was {got:?}");
    }

    #[test]
    fn ffs_with_k_equal_to_feature_count_may_stop_early_but_stays_valid() {
        let data = informative_fixture(8, 6, &[1, 4], 2.0, 4);
        let got = forward_feature_selection(&data, 6, &ScorerSpec::default(), 6).unwrap();
        // duplicate-free subset of the schema
        let mut sorted = got.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), got.len());
        assert!(got.iter().all(|&j| j < 6));
        assert!(got.len() <= 6 && !got.is_empty());
    }

    #[test]
    fn selection_is_deterministic() {
        let data = informative_fixture(10, 30, &[2, 11, 23], 1.2, 7);
        let a = forward_feature_selection(&data, 5, &ScorerSpec::default(), 9).unwrap();
        let b = forward_feature_selection(&data, 5, &ScorerSpec::default(), 9).unwrap();
        assert_eq!(a, b);
        let r1 = recursive_feature_elimination(&data, 5, DEFAULT_RIDGE_LAMBDA).unwrap();
        let r2 = recursive_feature_elimination(&data, 5, DEFAULT_RIDGE_LAMBDA).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn single_class_rejected() {
        let mut data = informative_fixture(6, 8, &[0], 1.0, 8);
        data.labels = vec![ClassLabel::Low; data.labels.len()];
        assert!(forward_feature_selection(&data, 2, &ScorerSpec::default(), 0).is_err());
        assert!(recursive_feature_elimination(&data, 2, DEFAULT_RIDGE_LAMBDA).is_err());
    }

    #[test]
    fn ffs_with_model_scorer_runs() {
        let data = informative_fixture(8, 10, &[4], 2.5, 10);
        let scorer = ScorerSpec::Model {
            family: ModelFamily::Dt,
            params: crate::ml::default_params(ModelFamily::Dt),
        };
        let got = forward_feature_selection(&data, 2, &scorer, 11).unwrap();
        assert!(got.contains(&4), "{got:?}");
    }
}
