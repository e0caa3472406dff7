//! Labeled feature vectors from pre/post connectivity deltas, performance
//! scoring and binning, and feature selection.

pub mod delta;
pub mod scoring;
pub mod selection;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::connectivity::Metric;
use crate::error::{Error, Result};
use crate::features::scoring::ClassBinning;

/// Three-level performance-change label, ordered low < medium < high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Low,
    Medium,
    High,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Low, ClassLabel::Medium, ClassLabel::High];

    pub fn index(&self) -> usize {
        match self {
            ClassLabel::Low => 0,
            ClassLabel::Medium => 1,
            ClassLabel::High => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Low => "low",
            ClassLabel::Medium => "medium",
            ClassLabel::High => "high",
        }
    }

    pub fn parse(s: &str) -> Result<ClassLabel> {
        match s {
            "low" => Ok(ClassLabel::Low),
            "medium" => Ok(ClassLabel::Medium),
            "high" => Ok(ClassLabel::High),
            other => Err(Error::InvalidInput(format!("unknown class label {other:?}"))),
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one feature: which metric and which directed channel pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub metric: Metric,
    /// Influencing channel (matrix column).
    pub source: String,
    /// Influenced channel (matrix row).
    pub target: String,
}

/// One subject's flattened connectivity delta.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub feature_ids: Vec<FeatureId>,
}

impl FeatureVector {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.feature_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values but {} feature ids",
                self.values.len(),
                self.feature_ids.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite feature value {v}")));
        }
        Ok(())
    }
}

/// A labeled feature matrix with a shared schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// rows x features
    pub features: Array2<f64>,
    pub labels: Vec<ClassLabel>,
    pub feature_ids: Vec<FeatureId>,
    pub subject_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<ClassLabel>,
        feature_ids: Vec<FeatureId>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let d = Dataset {
            features,
            labels,
            feature_ids,
            subject_ids,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                self.features.nrows(),
                self.labels.len()
            )));
        }
        if self.features.ncols() != self.feature_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns but {} feature ids",
                self.features.ncols(),
                self.feature_ids.len()
            )));
        }
        if !self.subject_ids.is_empty() && self.subject_ids.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} subject ids but {} rows",
                self.subject_ids.len(),
                self.labels.len()
            )));
        }
        if let Some(v) = self.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite feature value {v}")));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Distinct labels present, in label order.
    pub fn classes_present(&self) -> Vec<ClassLabel> {
        ClassLabel::ALL
            .iter()
            .copied()
            .filter(|c| self.labels.contains(c))
            .collect()
    }

    /// Row subset (clones the selected rows).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let features = Array2::from_shape_fn((rows.len(), self.n_features()), |(r, c)| {
            self.features[[rows[r], c]]
        });
        Dataset {
            features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_ids: self.feature_ids.clone(),
            subject_ids: if self.subject_ids.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&r| self.subject_ids[r].clone()).collect()
            },
        }
    }

    /// Column subset (clones the selected columns).
    pub fn select_features(&self, cols: &[usize]) -> Dataset {
        let features = Array2::from_shape_fn((self.n_rows(), cols.len()), |(r, c)| {
            self.features[[r, cols[c]]]
        });
        Dataset {
            features,
            labels: self.labels.clone(),
            feature_ids: cols.iter().map(|&c| self.feature_ids[c].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    feature_ids: Vec<FeatureId>,
    binning: Option<ClassBinning>,
    band: Option<(f64, f64)>,
    metric: Option<Metric>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes a dataset as CSV (feature columns then a `label` column) plus a
/// JSON schema sidecar.
pub fn save_dataset(
    data: &Dataset,
    binning: Option<&ClassBinning>,
    band: Option<(f64, f64)>,
    metric: Option<Metric>,
    path: &Path,
) -> Result<()> {
    data.validate()?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut out = String::new();
    let header: Vec<String> = (0..data.n_features())
        .map(|i| format!("f{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..data.n_rows() {
        for c in 0..data.n_features() {
            out.push_str(&format!("{},", data.features[[r, c]]));
        }
        out.push_str(data.labels[r].as_str());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let meta = DatasetMeta {
        feature_ids: data.feature_ids.clone(),
        binning: binning.cloned(),
        band,
        metric,
    };
    let meta_path = sidecar(path);
    let text =
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta_path = sidecar(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let d = meta.feature_ids.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in body.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                col: fields.len(),
                message: format!("expected {} fields, found {}", d + 1, fields.len()),
            });
        }
        let mut row = Vec::with_capacity(d);
        for (j, f) in fields[..d].iter().enumerate() {
            row.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                col: j,
                message: format!("not a number: {f:?}"),
            })?);
        }
        labels.push(ClassLabel::parse(fields[d].trim())?);
        rows.push(row);
    }
    let n = rows.len();
    let features = Array2::from_shape_fn((n, d), |(r, c)| rows[r][c]);
    Dataset::new(features, labels, meta.feature_ids, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_dataset() -> Dataset {
        let ids = vec![
            FeatureId {
                metric: Metric::Pdc,
                source: "a".into(),
                target: "b".into(),
            },
            FeatureId {
                metric: Metric::Pdc,
                source: "b".into(),
                target: "a".into(),
            },
        ];
        Dataset::new(
            array![[0.1, 0.9], [0.8, 0.2], [0.4, 0.5]],
            vec![ClassLabel::Low, ClassLabel::Medium, ClassLabel::High],
            ids,
            vec!["s1".into(), "s2".into(), "s3".into()],
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trips() {
        let data = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        save_dataset(&data, None, Some((13.0, 29.0)), Some(Metric::Pdc), &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.labels, data.labels);
        assert_eq!(back.feature_ids, data.feature_ids);
        for (a, b) in back.features.iter().zip(data.features.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn row_and_feature_subsets() {
        let data = tiny_dataset();
        let sub = data.select_rows(&[2, 0]);
        assert_eq!(sub.labels, vec![ClassLabel::High, ClassLabel::Low]);
        assert_eq!(sub.features[[0, 1]], 0.5);
        let cols = data.select_features(&[1]);
        assert_eq!(cols.n_features(), 1);
        assert_eq!(cols.feature_ids[0].source, "b");
    }

    #[test]
    fn schema_mismatches_rejected() {
        let ids = tiny_dataset().feature_ids;
        assert!(Dataset::new(
            array![[0.0, 1.0]],
            vec![ClassLabel::Low, ClassLabel::Medium],
            ids.clone(),
            Vec::new()
        )
        .is_err());
        assert!(Dataset::new(
            array![[0.0]],
            vec![ClassLabel::Low],
            ids,
            Vec::new()
        )
        .is_err());
    }
}
