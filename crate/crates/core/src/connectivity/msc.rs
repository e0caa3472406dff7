//! Magnitude-squared coherence from a Welch cross-spectral density:
//! MSC_ab(f) = |S_ab(f)|^2 / (S_aa(f) * S_bb(f)), averaged over the band.

use ndarray::Array2;

use crate::connectivity::{ConnectivityMatrix, Metric};
use crate::error::{Error, Result};
use crate::spectral::CrossSpectralDensity;

/// Band-averaged magnitude-squared coherence matrix.
///
/// Averaging the per-frequency coherences keeps every entry inside [0, 1]
/// (each per-bin value obeys the Cauchy-Schwarz bound on the segment-averaged
/// spectra); the diagonal is exactly 1.
pub fn msc_matrix(csd: &CrossSpectralDensity, band: (f64, f64)) -> Result<ConnectivityMatrix> {
    let bins = csd.band_bins(band.0, band.1);
    if bins.is_empty() {
        return Err(Error::InvalidInput(format!(
            "band ({}, {}) contains no frequency bins (resolution {} Hz)",
            band.0,
            band.1,
            csd.freqs.get(1).copied().unwrap_or(f64::NAN)
        )));
    }
    let n = csd.n_channels();
    for &k in &bins {
        for a in 0..n {
            let s = csd.matrices[k][[a, a]].re;
            if !(s > 0.0) {
                return Err(Error::Numerical(format!(
                    "zero auto-spectrum for channel {a} at {} Hz; coherence undefined",
                    csd.freqs[k]
                )));
            }
        }
    }
    let mut values = Array2::<f64>::zeros((n, n));
    let inv = 1.0 / bins.len() as f64;
    for &k in &bins {
        let m = &csd.matrices[k];
        for a in 0..n {
            for b in 0..n {
                let num = m[[a, b]].norm_sqr();
                let den = m[[a, a]].re * m[[b, b]].re;
                values[[a, b]] += (num / den) * inv;
            }
        }
    }
    // clamp floating-point residue; exact diagonal
    for a in 0..n {
        values[[a, a]] = 1.0;
        for b in 0..n {
            values[[a, b]] = values[[a, b]].clamp(0.0, 1.0);
        }
    }
    // enforce exact symmetry against rounding differences
    for a in 0..n {
        for b in 0..a {
            let v = 0.5 * (values[[a, b]] + values[[b, a]]);
            values[[a, b]] = v;
            values[[b, a]] = v;
        }
    }
    ConnectivityMatrix::new(
        Metric::Msc,
        band,
        values,
        (1..=n).map(|i| format!("ch{i}")).collect(),
    )
}

/// As [`msc_matrix`] but stamps the caller's channel labels.
pub fn msc_matrix_labeled(
    csd: &CrossSpectralDensity,
    band: (f64, f64),
    labels: &[String],
) -> Result<ConnectivityMatrix> {
    let mut m = msc_matrix(csd, band)?;
    if labels.len() != m.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} channels",
            labels.len(),
            m.n_channels()
        )));
    }
    m.channel_labels = labels.to_vec();
    Ok(m)
}
