//! Channel-pair connectivity estimators, each reduced to a band-aggregated
//! n x n matrix: magnitude-squared coherence, wavelet coherence, and partial
//! directed coherence.

pub mod msc;
pub mod mvar;
pub mod wc;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::Session;

/// Default aggregation band, Hz (beta).
pub const DEFAULT_BAND: (f64, f64) = (13.0, 29.0);

/// Which estimator produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Msc,
    Wc,
    Pdc,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Msc => "msc",
            Metric::Wc => "wc",
            Metric::Pdc => "pdc",
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        match s {
            "msc" => Ok(Metric::Msc),
            "wc" => Ok(Metric::Wc),
            "pdc" => Ok(Metric::Pdc),
            other => Err(Error::InvalidInput(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A band-aggregated connectivity matrix over labeled channels.
///
/// All values lie in [0, 1]. MSC and WC matrices are symmetric with unit
/// diagonal; PDC matrices are directed, entry (i, j) being the influence of
/// channel j on channel i.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    pub metric: Metric,
    pub band: (f64, f64),
    pub values: Array2<f64>,
    pub channel_labels: Vec<String>,
}

impl ConnectivityMatrix {
    pub fn new(
        metric: Metric,
        band: (f64, f64),
        values: Array2<f64>,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        let m = ConnectivityMatrix {
            metric,
            band,
            values,
            channel_labels,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channel_labels.len();
        if self.values.nrows() != n || self.values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "values are {}x{} but {} channel labels",
                self.values.nrows(),
                self.values.ncols(),
                n
            )));
        }
        if !(self.band.0 < self.band.1) {
            return Err(Error::InvalidInput(format!(
                "band ({}, {}) is not ascending",
                self.band.0, self.band.1
            )));
        }
        for ((i, j), &v) in self.values.indexed_iter() {
            if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(Error::Numerical(format!(
                    "connectivity value {v} at ({i},{j}) outside [0, 1]"
                )));
            }
        }
        if matches!(self.metric, Metric::Msc | Metric::Wc) {
            for i in 0..n {
                if (self.values[[i, i]] - 1.0).abs() > 1e-9 {
                    return Err(Error::Numerical(format!(
                        "{} diagonal entry {} at channel {i} is not 1",
                        self.metric,
                        self.values[[i, i]]
                    )));
                }
                for j in 0..i {
                    if (self.values[[i, j]] - self.values[[j, i]]).abs() > 1e-10 {
                        return Err(Error::Numerical(format!(
                            "{} matrix not symmetric at ({i},{j})",
                            self.metric
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixMeta {
    metric: Metric,
    band: (f64, f64),
    channel_labels: Vec<String>,
    subject_id: String,
    session: Session,
}

/// Provenance carried in a matrix file's sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProvenance {
    pub subject_id: String,
    pub session: Session,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes a matrix as CSV (n rows of n values, no header) plus a JSON sidecar
/// with metric, band, labels and provenance.
pub fn save_matrix(
    matrix: &ConnectivityMatrix,
    prov: &MatrixProvenance,
    path: &Path,
) -> Result<()> {
    matrix.validate()?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut out = String::new();
    for i in 0..matrix.n_channels() {
        let row: Vec<String> = (0..matrix.n_channels())
            .map(|j| format!("{}", matrix.values[[i, j]]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let meta = MatrixMeta {
        metric: matrix.metric,
        band: matrix.band,
        channel_labels: matrix.channel_labels.clone(),
        subject_id: prov.subject_id.clone(),
        session: prov.session,
    };
    let meta_path = sidecar(path);
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Reads a matrix and its provenance back from disk.
pub fn load_matrix(path: &Path) -> Result<(ConnectivityMatrix, MatrixProvenance)> {
    let meta_path = sidecar(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MatrixMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let n = meta.channel_labels.len();
    let mut values = Array2::<f64>::zeros((n, n));
    let mut rows = 0usize;
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i >= n {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                col: 0,
                message: format!("more than {n} rows"),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                col: fields.len(),
                message: format!("expected {n} values, found {}", fields.len()),
            });
        }
        for (j, field) in fields.iter().enumerate() {
            values[[i, j]] = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                col: j,
                message: format!("not a number: {field:?}"),
            })?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: rows,
            col: 0,
            message: format!("expected {n} rows, found {rows}"),
        });
    }
    let matrix = ConnectivityMatrix::new(meta.metric, meta.band, values, meta.channel_labels)?;
    Ok((
        matrix,
        MatrixProvenance {
            subject_id: meta.subject_id,
            session: meta.session,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn matrix_round_trips_with_provenance() {
        let m = ConnectivityMatrix::new(
            Metric::Pdc,
            (13.0, 29.0),
            array![[1.0, 0.25], [0.6247, 0.9]],
            vec!["ch1".into(), "ch2".into()],
        )
        .unwrap();
        let prov = MatrixProvenance {
            subject_id: "s07".into(),
            session: Session::Post,
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("pdc.csv");
        save_matrix(&m, &prov, &path).unwrap();
        let (back, back_prov) = load_matrix(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back_prov, prov);
    }

    #[test]
    fn symmetric_metrics_require_symmetry_and_unit_diagonal() {
        assert!(ConnectivityMatrix::new(
            Metric::Msc,
            (13.0, 29.0),
            array![[1.0, 0.2], [0.3, 1.0]],
            vec!["a".into(), "b".into()],
        )
        .is_err());
        assert!(ConnectivityMatrix::new(
            Metric::Wc,
            (13.0, 29.0),
            array![[0.5, 0.2], [0.2, 1.0]],
            vec!["a".into(), "b".into()],
        )
        .is_err());
    }

    #[test]
    fn out_of_range_values_rejected() {
        assert!(ConnectivityMatrix::new(
            Metric::Pdc,
            (13.0, 29.0),
            array![[1.0, 1.5], [0.0, 1.0]],
            vec!["a".into(), "b".into()],
        )
        .is_err());
    }
}
