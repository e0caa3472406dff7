//! Frequency-domain estimators shared by the connectivity metrics.

pub mod cwt;
pub mod welch;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Per-frequency cross-spectral matrices from Welch estimation.
///
/// `matrices[k]` is the n x n matrix at `freqs[k]`; entry (a, b) is the
/// cross-spectral density of channels a and b, so each matrix is Hermitian
/// with real non-negative diagonal.
#[derive(Debug, Clone)]
pub struct CrossSpectralDensity {
    pub freqs: Vec<f64>,
    pub matrices: Vec<Array2<Complex64>>,
    pub n_segments: usize,
    pub window_len: usize,
}

impl CrossSpectralDensity {
    pub fn n_channels(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    /// Indices of frequency bins inside `[low, high]` (inclusive).
    pub fn band_bins(&self, low: f64, high: f64) -> Vec<usize> {
        self.freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= low && f <= high)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Complex Morlet transform of one channel.
///
/// `coefficients` is freqs x times. `coi_margins[k]` is the number of columns
/// at each edge of row k that lie inside the cone of influence (edge-effect
/// region); downstream aggregation excludes them.
#[derive(Debug, Clone)]
pub struct WaveletTransform {
    pub freqs: Vec<f64>,
    pub times: Vec<f64>,
    pub coefficients: Array2<Complex64>,
    pub omega0: f64,
    pub coi_margins: Vec<usize>,
}

impl WaveletTransform {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub(crate) fn check_same_grid(&self, other: &WaveletTransform) -> Result<()> {
        if self.freqs != other.freqs || self.times.len() != other.times.len() {
            return Err(Error::DimensionMismatch(
                "wavelet transforms computed on different frequency/time grids".into(),
            ));
        }
        Ok(())
    }
}
