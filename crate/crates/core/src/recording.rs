//! The multichannel recording data model and its on-disk format.
//!
//! A recording is stored as a plain CSV file (header row of channel labels,
//! one sample per row) next to a JSON sidecar `<name>.meta.json` carrying the
//! sample rate, channel labels, subject id and session tag. Text keeps
//! fixtures diffable and the CSV float encoding round-trips exactly.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the intervention a recording belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Pre,
    Post,
}

impl Session {
    pub fn as_str(&self) -> &'static str {
        match self {
            Session::Pre => "pre",
            Session::Post => "post",
        }
    }
}

impl std::fmt::Display for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An n-channel, fixed-rate time series.
///
/// `data` is samples x channels; column order matches `channels`. Values are
/// finite, there are at least 2 channels and 2 samples, and labels are unique
/// (label lookup, e.g. for re-referencing, would otherwise be ambiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub data: Array2<f64>,
    pub subject_id: String,
    pub session: Session,
}

#[derive(Serialize, Deserialize)]
struct RecordingMeta {
    sample_rate: f64,
    channels: Vec<String>,
    subject_id: String,
    session: Session,
}

impl Recording {
    /// Builds a recording, validating all structural invariants.
    pub fn new(
        sample_rate: f64,
        channels: Vec<String>,
        data: Array2<f64>,
        subject_id: impl Into<String>,
        session: Session,
    ) -> Result<Self> {
        let rec = Recording {
            sample_rate,
            channels,
            data,
            subject_id: subject_id.into(),
            session,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::InvalidRecording(format!(
                "sample_rate must be a positive real, got {}",
                self.sample_rate
            )));
        }
        if self.channels.len() < 2 {
            return Err(Error::InvalidRecording(format!(
                "need at least 2 channels, got {}",
                self.channels.len()
            )));
        }
        if self.data.nrows() < 2 {
            return Err(Error::InvalidRecording(format!(
                "need at least 2 samples, got {}",
                self.data.nrows()
            )));
        }
        if self.data.ncols() != self.channels.len() {
            return Err(Error::InvalidRecording(format!(
                "data has {} columns but {} channel labels",
                self.data.ncols(),
                self.channels.len()
            )));
        }
        for (i, a) in self.channels.iter().enumerate() {
            for b in self.channels.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidRecording(format!(
                        "duplicate channel label {a:?}"
                    )));
                }
            }
        }
        if let Some(((r, c), v)) = self.data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidRecording(format!(
                "non-finite sample {v} at row {r}, channel {c}"
            )));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn duration_secs(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    /// One channel as a contiguous vector.
    pub fn channel(&self, idx: usize) -> Vec<f64> {
        self.data.column(idx).to_vec()
    }

    /// Same recording with replaced data; shape must be unchanged.
    pub(crate) fn with_data(&self, data: Array2<f64>) -> Recording {
        debug_assert_eq!(data.dim(), self.data.dim());
        Recording {
            sample_rate: self.sample_rate,
            channels: self.channels.clone(),
            data,
            subject_id: self.subject_id.clone(),
            session: self.session,
        }
    }
}

/// Sidecar path for a data file: `dir/name.csv` -> `dir/name.meta.json`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.json")
}

/// Reads a recording from `path` (CSV) and its JSON sidecar.
pub fn load_recording(path: &Path) -> Result<Recording> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RecordingMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            ),
            _ => Error::Parse {
                path: path.to_path_buf(),
                row: 0,
                col: 0,
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            col: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();

    if headers != meta.channels {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            col: 0,
            message: format!(
                "sidecar lists {} channels {:?} but CSV header has {} columns {:?}",
                meta.channels.len(),
                meta.channels,
                headers.len(),
                headers
            ),
        });
    }

    let n_cols = headers.len();
    let mut values: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: row_idx + 1,
            col: 0,
            message: e.to_string(),
        })?;
        if record.len() != n_cols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: row_idx + 1,
                col: record.len(),
                message: format!("expected {} columns, found {}", n_cols, record.len()),
            });
        }
        for (col_idx, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: row_idx + 1,
                col: col_idx,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row_idx + 1,
                    col: col_idx,
                    message: format!("non-finite sample {v}"),
                });
            }
            values.push(v);
        }
        n_rows += 1;
    }

    let data = Array2::from_shape_vec((n_rows, n_cols), values)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Recording::new(
        meta.sample_rate,
        meta.channels,
        data,
        meta.subject_id,
        meta.session,
    )
}

/// Writes a recording as CSV plus sidecar. Float fields use the shortest
/// representation that parses back to the identical bit pattern, so a
/// save/load round trip is lossless.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    rec.validate()?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        )
    })?;
    writer
        .write_record(&rec.channels)
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::Other, e)))?;
    let mut row: Vec<String> = Vec::with_capacity(rec.n_channels());
    for r in 0..rec.n_samples() {
        row.clear();
        for c in 0..rec.n_channels() {
            let mut buf = ryu_format(rec.data[[r, c]]);
            if buf == "-0.0" {
                buf = "0.0".to_string();
            }
            row.push(buf);
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::Other, e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::Other, e)))?;

    let meta = RecordingMeta {
        sample_rate: rec.sample_rate,
        channels: rec.channels.clone(),
        subject_id: rec.subject_id.clone(),
        session: rec.session,
    };
    let meta_path = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| {
        Error::io(
            &meta_path,
            std::io::Error::new(std::io::ErrorKind::Other, e),
        )
    })?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Shortest exact decimal for an f64 (std's Display implements this).
fn ryu_format(v: f64) -> String {
    let s = format!("{v}");
    // keep a decimal point so files read unambiguously as floats
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    fn two_channel() -> Recording {
        Recording::new(
            256.0,
            vec!["c1".into(), "c2".into()],
            array![[0.1, -0.25], [1.5e-17, 3.0], [2.0, 4.0], [-1.0, 0.0]],
            "s01",
            Session::Pre,
        )
        .unwrap()
    }

    #[test]
    fn smallest_valid_file_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let rec = Recording::new(
            256.0,
            vec!["a".into(), "b".into()],
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]],
            "s01",
            Session::Pre,
        )
        .unwrap();
        save_recording(&rec, &path).unwrap();
        let back = load_recording(&path).unwrap();
        assert_eq!(back.data.dim(), (4, 2));
        assert_eq!(back.sample_rate, 256.0);
        assert_eq!(back.channels, rec.channels);
        assert_eq!(back.session, Session::Pre);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let rec = two_channel();
        save_recording(&rec, &path).unwrap();
        let back = load_recording(&path).unwrap();
        for (a, b) in rec.data.iter().zip(back.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn column_count_mismatch_reports_location() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        save_recording(&two_channel(), &path).unwrap();
        // corrupt the sidecar to claim a third channel
        let meta_path = sidecar_path(&path);
        let text = fs::read_to_string(&meta_path).unwrap();
        let patched = text.replace("\"c1\",", "\"c0\",\n    \"c1\",");
        fs::write(&meta_path, patched).unwrap();
        let err = load_recording(&path).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("3 channels")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_sample_is_located() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        save_recording(&two_channel(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let patched = text.replace("3.0", "NaN");
        fs::write(&path, patched).unwrap();
        let err = load_recording(&path).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!(row, 2);
                assert_eq!(col, 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_recording(Path::new("/nonexistent/rec.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn save_to_unwritable_destination_fails() {
        let err = save_recording(&two_channel(), Path::new("/proc/forbidden/rec.csv"));
        assert!(err.is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(Recording::new(
            0.0,
            vec!["a".into(), "b".into()],
            array![[1.0, 2.0], [3.0, 4.0]],
            "s",
            Session::Pre
        )
        .is_err());
        assert!(Recording::new(
            256.0,
            vec!["a".into()],
            array![[1.0], [2.0]],
            "s",
            Session::Pre
        )
        .is_err());
        assert!(Recording::new(
            256.0,
            vec!["a".into(), "a".into()],
            array![[1.0, 2.0], [3.0, 4.0]],
            "s",
            Session::Pre
        )
        .is_err());
        assert!(Recording::new(
            256.0,
            vec!["a".into(), "b".into()],
            array![[1.0, f64::NAN], [3.0, 4.0]],
            "s",
            Session::Pre
        )
        .is_err());
    }

    #[test]
    fn sixty_seconds_at_256_hz_writes_15360_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("long.csv");
        let n = 60 * 256;
        let data = Array2::from_shape_fn((n, 2), |(r, c)| (r * 2 + c) as f64 * 1e-3);
        let rec = Recording::new(
            256.0,
            vec!["a".into(), "b".into()],
            data,
            "s01",
            Session::Post,
        )
        .unwrap();
        save_recording(&rec, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // header + 15360 data rows
        assert_eq!(text.lines().count(), 15360 + 1);
    }
}
