//! Repeated stratified k-fold splitting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::ClassLabel;
use crate::rng::{derive_seed, seeded_rng};

/// Cross-validation shape: k folds, repeated with fresh shuffles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 10,
            repeats: 3,
        }
    }
}

/// One train/test split over row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold splits, repeated `repeats` times with reshuffles.
///
/// Within each repeat the test sets partition all rows and each fold's class
/// counts differ from exact proportionality by at most one sample per class.
/// If the smallest class has fewer than `k` members, k is reduced to that
/// count (with a warning). Deterministic in `seed`.
pub fn repeated_stratified_kfold(
    labels: &[ClassLabel],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    if labels.is_empty() || repeats == 0 || k < 2 {
        return Err(Error::InvalidInput(
            "need non-empty labels, k >= 2 and repeats >= 1".into(),
        ));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ClassLabel::ALL.len()];
    for (i, l) in labels.iter().enumerate() {
        per_class[l.index()].push(i);
    }
    let present: Vec<&Vec<usize>> = per_class.iter().filter(|v| !v.is_empty()).collect();
    let min_class = present.iter().map(|v| v.len()).min().unwrap();
    if min_class < 2 {
        return Err(Error::InvalidInput(format!(
            "smallest class has {min_class} member(s); need at least 2 per class"
        )));
    }
    let k_eff = if min_class < k {
        log::warn!("smallest class has {min_class} members; reducing folds from {k} to {min_class}");
        min_class
    } else {
        k
    };

    let mut splits = Vec::with_capacity(k_eff * repeats);
    for rep in 0..repeats {
        let mut rng = seeded_rng(derive_seed(seed, &[rep as u64]));
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k_eff];
        // rotate which folds receive each class's remainder so fold sizes
        // stay balanced overall
        let mut start = 0usize;
        for class_rows in per_class.iter().filter(|v| !v.is_empty()) {
            let mut rows = class_rows.clone();
            rows.shuffle(&mut rng);
            let base = rows.len() / k_eff;
            let rem = rows.len() % k_eff;
            let mut cursor = 0usize;
            for f in 0..k_eff {
                let extra = if (f + k_eff - start) % k_eff < rem { 1 } else { 0 };
                let take = base + extra;
                folds[f].extend_from_slice(&rows[cursor..cursor + take]);
                cursor += take;
            }
            start = (start + rem) % k_eff;
        }
        for f in 0..k_eff {
            let mut test = folds[f].clone();
            test.sort_unstable();
            let mut train: Vec<usize> = (0..labels.len()).filter(|i| !test.contains(i)).collect();
            train.sort_unstable();
            splits.push(Split { train, test });
        }
    }
    Ok(splits)
}
