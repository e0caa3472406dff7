//! Hyperparameter grids and exhaustive grid search under repeated
//! stratified cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ClassLabel, Dataset};
use crate::ml::cv::{repeated_stratified_kfold, CvSpec, Split};
use crate::ml::{resolve_params, train, ModelFamily, ParamMap, ParamValue};
use crate::rng::derive_seed;

/// Ordered axes of hyperparameter values for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterGrid {
    pub family: ModelFamily,
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl HyperparameterGrid {
    /// Number of grid points (product of axis lengths).
    pub fn cardinality(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len().max(1)).product()
    }

    /// Decodes point `idx` with the first axis slowest (odometer order).
    pub fn point(&self, idx: usize) -> ParamMap {
        let mut map = ParamMap::new();
        let mut rem = idx;
        let mut stride: usize = self.cardinality();
        for (name, values) in &self.axes {
            stride /= values.len();
            let pos = rem / stride;
            rem %= stride;
            map.0.insert(name.clone(), values[pos].clone());
        }
        map
    }

    /// Validates every axis value against the family's documented ranges.
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidInput("empty hyperparameter grid".into()));
        }
        for (name, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::InvalidInput(format!("axis {name:?} has no values")));
            }
            for v in values {
                let single = ParamMap::new().set(name, v.clone());
                resolve_params(self.family, &single)?;
            }
        }
        Ok(())
    }
}

/// Log-spaced / subsampled default grid: small enough to search exhaustively
/// while spanning each documented range.
pub fn coarse_grid(family: ModelFamily) -> HyperparameterGrid {
    let axes: Vec<(String, Vec<ParamValue>)> = match family {
        ModelFamily::Svm => vec![
            (
                "kernel".into(),
                ["linear", "polynomial", "rbf"]
                    .iter()
                    .map(|s| ParamValue::Text((*s).into()))
                    .collect(),
            ),
            (
                "c".into(),
                [0.01, 0.1, 1.0, 10.0, 100.0]
                    .iter()
                    .map(|v| ParamValue::Float(*v))
                    .collect(),
            ),
            (
                "gamma".into(),
                [0.001, 0.01, 0.1, 1.0]
                    .iter()
                    .map(|v| ParamValue::Float(*v))
                    .collect(),
            ),
        ],
        ModelFamily::Dt => vec![
            (
                "max_depth".into(),
                [2i64, 4, 6, 8, 10].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "min_samples_split".into(),
                [2i64, 5, 10].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "min_samples_leaf".into(),
                [1i64, 4, 8].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
        ],
        ModelFamily::Rf => vec![
            (
                "max_depth".into(),
                [2i64, 6, 10].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "min_samples_split".into(),
                [2i64, 5].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "min_samples_leaf".into(),
                [1i64, 4].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "n_estimators".into(),
                [10i64, 40, 100].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
        ],
        ModelFamily::Mlp => vec![
            (
                "hidden_layers".into(),
                vec![ParamValue::Int(1)],
            ),
            (
                "hidden_nodes".into(),
                [10i64, 50].iter().map(|v| ParamValue::Int(*v)).collect(),
            ),
            (
                "activation".into(),
                ["relu", "tanh"]
                    .iter()
                    .map(|s| ParamValue::Text((*s).into()))
                    .collect(),
            ),
            (
                "solver".into(),
                vec![ParamValue::Text("adam".into())],
            ),
            (
                "alpha".into(),
                [0.0001, 0.1].iter().map(|v| ParamValue::Float(*v)).collect(),
            ),
        ],
    };
    HyperparameterGrid { family, axes }
}

/// The full documented ranges at their stated step sizes. These grids are
/// enormous (the SVM one holds 30 million points); they exist for explicit
/// opt-in and for cardinality reporting, not for routine searches.
pub fn full_grid(family: ModelFamily) -> HyperparameterGrid {
    fn float_steps(lo: f64, step: f64, n: usize) -> Vec<ParamValue> {
        (0..n)
            .map(|i| ParamValue::Float((lo + step * i as f64 * 1e6).round() / 1e6))
            .collect()
    }
    fn int_steps(lo: i64, hi: i64, step: i64) -> Vec<ParamValue> {
        (lo..=hi).step_by(step as usize).map(ParamValue::Int).collect()
    }
    let axes: Vec<(String, Vec<ParamValue>)> = match family {
        ModelFamily::Svm => vec![
            (
                "kernel".into(),
                ["linear", "polynomial", "rbf"]
                    .iter()
                    .map(|s| ParamValue::Text((*s).into()))
                    .collect(),
            ),
            ("c".into(), float_steps(0.01, 0.01, 10_000)),
            ("gamma".into(), float_steps(0.001, 0.001, 1000)),
        ],
        ModelFamily::Dt => vec![
            ("max_depth".into(), int_steps(2, 10, 1)),
            ("min_samples_split".into(), int_steps(2, 10, 1)),
            ("min_samples_leaf".into(), int_steps(1, 10, 1)),
        ],
        ModelFamily::Rf => vec![
            ("max_depth".into(), int_steps(2, 10, 1)),
            ("min_samples_split".into(), int_steps(2, 10, 1)),
            ("min_samples_leaf".into(), int_steps(1, 10, 1)),
            ("n_estimators".into(), int_steps(10, 100, 10)),
        ],
        ModelFamily::Mlp => vec![
            ("hidden_layers".into(), int_steps(1, 3, 1)),
            ("hidden_nodes".into(), int_steps(10, 1000, 10)),
            (
                "activation".into(),
                ["logistic", "tanh", "relu"]
                    .iter()
                    .map(|s| ParamValue::Text((*s).into()))
                    .collect(),
            ),
            (
                "solver".into(),
                ["adam", "sgd"]
                    .iter()
                    .map(|s| ParamValue::Text((*s).into()))
                    .collect(),
            ),
            ("alpha".into(), float_steps(0.0001, 0.001, 100)),
        ],
    };
    HyperparameterGrid { family, axes }
}

/// Mean cross-validated accuracy of one grid point, percent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointScore {
    pub params: ParamMap,
    pub mean_accuracy: f64,
}

/// Grid-search outcome: the winning point's folds, parameters and confusion
/// matrix, plus every point's mean score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub family: ModelFamily,
    /// Percent accuracy per fold (folds x repeats entries) of the best point.
    pub fold_accuracies: Vec<f64>,
    /// Arithmetic mean of `fold_accuracies`, percent.
    pub mean_accuracy: f64,
    pub best_params: ParamMap,
    pub seed: u64,
    /// Rows = true class, columns = predicted, in label order, accumulated
    /// over every fold of the best point.
    pub confusion: Vec<Vec<usize>>,
    pub grid_cardinality: usize,
    pub point_scores: Vec<PointScore>,
}

impl CvReport {
    pub fn mean_fraction(&self) -> f64 {
        self.mean_accuracy / 100.0
    }
}

/// Per-fold feature selection hook: maps (fold index, training rows) to the
/// retained feature columns.
pub(crate) type FoldSelector<'a> = dyn Fn(usize, &[usize]) -> Result<Vec<usize>> + Sync + 'a;

/// Exhaustive grid search under the given CV spec.
pub fn grid_search(
    data: &Dataset,
    grid: &HyperparameterGrid,
    cv: &CvSpec,
    seed: u64,
) -> Result<CvReport> {
    let splits = repeated_stratified_kfold(&data.labels, cv.folds, cv.repeats, derive_seed(seed, &[0xcf]))?;
    run_search(data, grid, &splits, seed, None)
}

/// Shared machinery behind [`grid_search`] and the end-to-end pipeline:
/// optional per-fold feature selection (training rows only), then every grid
/// point scored on every fold. The winner is the highest mean accuracy;
/// ties resolve to the earliest point in axis iteration order.
pub(crate) fn run_search(
    data: &Dataset,
    grid: &HyperparameterGrid,
    splits: &[Split],
    seed: u64,
    selector: Option<&FoldSelector<'_>>,
) -> Result<CvReport> {
    grid.validate()?;
    data.validate()?;
    let n_points = grid.cardinality();
    let n_folds = splits.len();

    // fold-level column selection is independent of the grid point
    let fold_columns: Vec<Option<Vec<usize>>> = match selector {
        None => vec![None; n_folds],
        Some(select) => (0..n_folds)
            .into_par_iter()
            .map(|f| select(f, &splits[f].train).map(Some))
            .collect::<Result<Vec<_>>>()?,
    };

    // evaluate (point, fold) tasks; each derives its own seed so results are
    // independent of scheduling
    let evals: Vec<Result<(f64, [[usize; 3]; 3])>> = (0..n_points * n_folds)
        .into_par_iter()
        .map(|task| {
            let point_idx = task / n_folds;
            let fold_idx = task % n_folds;
            let split = &splits[fold_idx];
            let params = grid.point(point_idx);
            let (train_data, test_data) = match &fold_columns[fold_idx] {
                None => (
                    data.select_rows(&split.train),
                    data.select_rows(&split.test),
                ),
                Some(cols) => {
                    let reduced = data.select_features(cols);
                    (
                        reduced.select_rows(&split.train),
                        reduced.select_rows(&split.test),
                    )
                }
            };
            let model = train(
                grid.family,
                &params,
                &train_data,
                derive_seed(seed, &[1, point_idx as u64, fold_idx as u64]),
            )?;
            let mut hits = 0usize;
            let mut confusion = [[0usize; 3]; 3];
            for r in 0..test_data.n_rows() {
                let row: Vec<f64> = test_data.features.row(r).to_vec();
                let pred = model.predict_row(&row);
                let truth = test_data.labels[r];
                confusion[truth.index()][pred.index()] += 1;
                if pred == truth {
                    hits += 1;
                }
            }
            let acc = 100.0 * hits as f64 / test_data.n_rows().max(1) as f64;
            Ok((acc, confusion))
        })
        .collect();

    let mut point_scores = Vec::with_capacity(n_points);
    let mut best_idx = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    let mut fold_accs: Vec<Vec<f64>> = vec![Vec::new(); n_points];
    let mut fold_confusions: Vec<[[usize; 3]; 3]> = vec![[[0; 3]; 3]; n_points];
    for (task, eval) in evals.into_iter().enumerate() {
        let point_idx = task / n_folds;
        let (acc, confusion) = eval?;
        fold_accs[point_idx].push(acc);
        for i in 0..3 {
            for j in 0..3 {
                fold_confusions[point_idx][i][j] += confusion[i][j];
            }
        }
    }
    for (point_idx, accs) in fold_accs.iter().enumerate() {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        point_scores.push(PointScore {
            params: grid.point(point_idx),
            mean_accuracy: mean,
        });
        if mean > best_mean {
            best_mean = mean;
            best_idx = point_idx;
        }
    }

    let confusion = fold_confusions[best_idx]
        .iter()
        .map(|row| row.to_vec())
        .collect();
    Ok(CvReport {
        family: grid.family,
        fold_accuracies: fold_accs[best_idx].clone(),
        mean_accuracy: best_mean,
        best_params: grid.point(best_idx),
        seed,
        confusion,
        grid_cardinality: n_points,
        point_scores,
    })
}

/// Counts per test row of the given splits, by true class (diagnostic).
pub fn class_test_counts(labels: &[ClassLabel], splits: &[Split]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for s in splits {
        for &t in &s.test {
            counts[labels[t].index()] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::test_fixtures::blobs;

    #[test]
    fn single_point_grid_reports_all_folds() {
        let data = blobs(20, 2);
        let grid = HyperparameterGrid {
            family: ModelFamily::Dt,
            axes: vec![("max_depth".into(), vec![ParamValue::Int(4)])],
        };
        let report = grid_search(&data, &grid, &CvSpec::default(), 5).unwrap();
        assert_eq!(report.fold_accuracies.len(), 30);
        assert_eq!(report.grid_cardinality, 1);
        let mean = report.fold_accuracies.iter().sum::<f64>() / 30.0;
        assert!((report.mean_accuracy - mean).abs() < 1e-12);
        // every row tested once per repeat
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, data.n_rows() * 3);
        for (c, row) in report.confusion.iter().enumerate() {
            let class_count = data.labels.iter().filter(|l| l.index() == c).count();
            assert_eq!(row.iter().sum::<usize>(), class_count * 3);
        }
    }

    #[test]
    fn separable_fixture_reaches_high_accuracy() {
        let data = blobs(20, 3);
        let grid = HyperparameterGrid {
            family: ModelFamily::Svm,
            axes: vec![
                ("kernel".into(), vec![ParamValue::Text("linear".into())]),
                (
                    "c".into(),
                    vec![ParamValue::Float(0.1), ParamValue::Float(1.0), ParamValue::Float(10.0)],
                ),
            ],
        };
        let report = grid_search(&data, &grid, &CvSpec::default(), 7).unwrap();
        assert!(report.mean_accuracy >= 95.0, "mean {}", report.mean_accuracy);
        assert_eq!(report.point_scores.len(), 3);
    }

    #[test]
    fn duplicate_worse_axis_value_never_changes_winner() {
        let data = blobs(15, 4);
        let base = HyperparameterGrid {
            family: ModelFamily::Dt,
            axes: vec![(
                "max_depth".into(),
                vec![ParamValue::Int(6), ParamValue::Int(2)],
            )],
        };
        let with_dup = HyperparameterGrid {
            family: ModelFamily::Dt,
            axes: vec![(
                "max_depth".into(),
                vec![ParamValue::Int(6), ParamValue::Int(2), ParamValue::Int(2)],
            )],
        };
        let a = grid_search(&data, &base, &CvSpec::default(), 9).unwrap();
        let b = grid_search(&data, &with_dup, &CvSpec::default(), 9).unwrap();
        assert_eq!(a.best_params, b.best_params);
    }

    #[test]
    fn odometer_order_and_tie_break() {
        let grid = HyperparameterGrid {
            family: ModelFamily::Dt,
            axes: vec![
                (
                    "max_depth".into(),
                    vec![ParamValue::Int(2), ParamValue::Int(4)],
                ),
                (
                    "min_samples_leaf".into(),
                    vec![ParamValue::Int(1), ParamValue::Int(4), ParamValue::Int(8)],
                ),
            ],
        };
        assert_eq!(grid.cardinality(), 6);
        let p0 = grid.point(0);
        assert_eq!(p0.get("max_depth"), Some(&ParamValue::Int(2)));
        assert_eq!(p0.get("min_samples_leaf"), Some(&ParamValue::Int(1)));
        let p4 = grid.point(4);
        assert_eq!(p4.get("max_depth"), Some(&ParamValue::Int(4)));
        assert_eq!(p4.get("min_samples_leaf"), Some(&ParamValue::Int(4)));
    }

    #[test]
    fn grid_values_outside_ranges_rejected() {
        let grid = HyperparameterGrid {
            family: ModelFamily::Dt,
            axes: vec![("max_depth".into(), vec![ParamValue::Int(99)])],
        };
        assert!(grid.validate().is_err());
    }

    #[test]
    fn full_grid_cardinalities() {
        assert_eq!(full_grid(ModelFamily::Svm).cardinality(), 30_000_000);
        assert_eq!(full_grid(ModelFamily::Dt).cardinality(), 9 * 9 * 10);
        assert_eq!(full_grid(ModelFamily::Rf).cardinality(), 9 * 9 * 10 * 10);
    }

    #[test]
    fn identical_seeds_identical_reports() {
        let data = blobs(12, 8);
        let grid = coarse_grid(ModelFamily::Dt);
        let a = grid_search(&data, &grid, &CvSpec { folds: 5, repeats: 2 }, 31).unwrap();
        let b = grid_search(&data, &grid, &CvSpec { folds: 5, repeats: 2 }, 31).unwrap();
        assert_eq!(a, b);
        let json_a = serde_json::to_string(&a).unwrap();
        let json_b = serde_json::to_string(&b).unwrap();
        assert_eq!(json_a, json_b);
    }
}
