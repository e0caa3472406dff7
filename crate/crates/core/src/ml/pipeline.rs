//! End-to-end evaluation of one (metric, selector, family) cell: pre/post
//! connectivity deltas -> flattened features -> per-fold feature selection on
//! training rows only -> grid search under repeated stratified CV.

use ndarray::Array2;

use crate::connectivity::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::features::delta::{connectivity_delta_with, flatten, DeltaMode};
use crate::features::selection::SelectorSpec;
use crate::features::{ClassLabel, Dataset};
use crate::ml::cv::{repeated_stratified_kfold, CvSpec};
use crate::ml::grid::{run_search, CvReport, HyperparameterGrid};
use crate::rng::derive_seed;

/// One subject's matched pre/post matrices and performance-change label.
#[derive(Debug, Clone)]
pub struct SubjectMatrices {
    pub subject_id: String,
    pub pre: ConnectivityMatrix,
    pub post: ConnectivityMatrix,
    pub label: ClassLabel,
}

/// Everything that defines one evaluation cell.
#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub delta_mode: DeltaMode,
    pub selector: Option<SelectorSpec>,
    pub grid: HyperparameterGrid,
    pub cv: CvSpec,
}

/// Flattened |post - pre| features for a cohort, one row per subject.
pub fn build_delta_dataset(subjects: &[SubjectMatrices], mode: DeltaMode) -> Result<Dataset> {
    if subjects.is_empty() {
        return Err(Error::InvalidInput("empty cohort".into()));
    }
    let first = &subjects[0];
    let template = flatten(
        &connectivity_delta_with(&first.pre, &first.post, mode)?,
        first.pre.metric,
        &first.pre.channel_labels,
    )?;
    let d = template.values.len();
    let mut features = Array2::<f64>::zeros((subjects.len(), d));
    let mut labels = Vec::with_capacity(subjects.len());
    let mut subject_ids = Vec::with_capacity(subjects.len());
    for (r, s) in subjects.iter().enumerate() {
        let fv = flatten(
            &connectivity_delta_with(&s.pre, &s.post, mode)?,
            s.pre.metric,
            &s.pre.channel_labels,
        )?;
        if fv.feature_ids != template.feature_ids {
            return Err(Error::InvalidInput(format!(
                "subject {} has a different feature schema (labels or metric differ)",
                s.subject_id
            )));
        }
        for (c, v) in fv.values.iter().enumerate() {
            features[[r, c]] = *v;
        }
        labels.push(s.label);
        subject_ids.push(s.subject_id.clone());
    }
    Dataset::new(features, labels, template.feature_ids, subject_ids)
}

/// Runs one cell. Feature selection, when requested, is refit inside every
/// fold on that fold's training rows only, so test rows never inform the
/// retained feature set.
pub fn evaluate_pipeline(
    subjects: &[SubjectMatrices],
    spec: &PipelineSpec,
    seed: u64,
) -> Result<CvReport> {
    let data = build_delta_dataset(subjects, spec.delta_mode)?;
    evaluate_on_dataset(&data, spec, seed)
}

/// As [`evaluate_pipeline`] but starting from an already-built dataset.
pub fn evaluate_on_dataset(data: &Dataset, spec: &PipelineSpec, seed: u64) -> Result<CvReport> {
    let splits = repeated_stratified_kfold(
        &data.labels,
        spec.cv.folds,
        spec.cv.repeats,
        derive_seed(seed, &[0xcf]),
    )?;
    match &spec.selector {
        None => run_search(data, &spec.grid, &splits, seed, None),
        Some(sel) => {
            let selector = |fold: usize, train_rows: &[usize]| -> Result<Vec<usize>> {
                let train_view = data.select_rows(train_rows);
                let mut cols = sel.select(&train_view, derive_seed(seed, &[0x5e1, fold as u64]))?;
                cols.sort_unstable();
                Ok(cols)
            };
            run_search(data, &spec.grid, &splits, seed, Some(&selector))
        }
    }
}
