//! Pre/post connectivity deltas and row-major flattening into feature vectors.

use ndarray::Array2;

use crate::connectivity::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureVector};

/// How the pre/post difference is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    /// |post - pre| (default; symmetric in its arguments).
    Absolute,
    /// post - pre, rescaled from [-1, 1] to [0, 1] so feature ranges stay bounded.
    Signed,
}

impl Default for DeltaMode {
    fn default() -> Self {
        DeltaMode::Absolute
    }
}

/// Elementwise difference of two matrices of the same metric/band/labels.
pub fn connectivity_delta(
    pre: &ConnectivityMatrix,
    post: &ConnectivityMatrix,
) -> Result<Array2<f64>> {
    connectivity_delta_with(pre, post, DeltaMode::Absolute)
}

/// [`connectivity_delta`] with an explicit mode.
pub fn connectivity_delta_with(
    pre: &ConnectivityMatrix,
    post: &ConnectivityMatrix,
    mode: DeltaMode,
) -> Result<Array2<f64>> {
    if pre.metric != post.metric {
        return Err(Error::InvalidInput(format!(
            "metric mismatch: {} vs {}",
            pre.metric, post.metric
        )));
    }
    if pre.band != post.band {
        return Err(Error::InvalidInput(format!(
            "band mismatch: {:?} vs {:?}",
            pre.band, post.band
        )));
    }
    if pre.channel_labels != post.channel_labels {
        return Err(Error::InvalidInput(
            "channel label mismatch between pre and post matrices".into(),
        ));
    }
    let n = pre.n_channels();
    let delta = Array2::from_shape_fn((n, n), |(i, j)| {
        let d = post.values[[i, j]] - pre.values[[i, j]];
        match mode {
            DeltaMode::Absolute => d.abs(),
            DeltaMode::Signed => (d + 1.0) / 2.0,
        }
    });
    Ok(delta)
}

/// Row-major flattening of a square matrix with aligned feature identities.
/// Entry (i, j) becomes the feature (metric, source = labels[j],
/// target = labels[i]).
pub fn flatten(
    matrix: &Array2<f64>,
    metric: crate::connectivity::Metric,
    labels: &[String],
) -> Result<FeatureVector> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected square",
            n,
            matrix.ncols()
        )));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a {n}x{n} matrix",
            labels.len()
        )));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut feature_ids = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(matrix[[i, j]]);
            feature_ids.push(FeatureId {
                metric,
                source: labels[j].clone(),
                target: labels[i].clone(),
            });
        }
    }
    let fv = FeatureVector {
        values,
        feature_ids,
    };
    fv.validate()?;
    Ok(fv)
}
