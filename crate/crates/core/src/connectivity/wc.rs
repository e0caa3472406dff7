//! Wavelet coherence: smoothed wavelet cross-spectrum magnitude normalized by
//! the smoothed auto-spectra, per time-frequency cell, then band/time
//! averaged into a channel-pair matrix.

use ndarray::Array2;
use num_complex::Complex64;

use crate::connectivity::{ConnectivityMatrix, Metric};
use crate::error::{Error, Result};
use crate::recording::Recording;
use crate::spectral::cwt::morlet_cwt;
use crate::spectral::WaveletTransform;

/// Time-smoothing request for the wavelet cross-spectrum: a boxcar spanning
/// `cycles / f` seconds at each frequency row.
///
/// The width controls how far spurious coherence between independent signals
/// is suppressed: a boxcar of C cycles holds roughly C / 2.4 independent
/// coefficient samples, and the expected spurious coherence magnitude decays
/// like the inverse square root of that count. The default of 24 cycles keeps
/// the independent-noise median safely below 0.35.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSpec {
    pub cycles: f64,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec { cycles: 24.0 }
    }
}

impl SmoothingSpec {
    /// Half-width (samples) of the boxcar at frequency `f`.
    fn half_window(&self, f: f64, dt: f64) -> usize {
        let w = (self.cycles / f / dt).round() as usize;
        w / 2
    }

    fn window_len(&self, f: f64, dt: f64) -> usize {
        2 * self.half_window(f, dt) + 1
    }
}

/// Boxcar-smoothed product series via prefix sums; the window is truncated at
/// the edges and re-normalized by the actual sample count.
fn smooth_row(products: &[Complex64], half: usize) -> Vec<Complex64> {
    let n = products.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex64::default());
    let mut acc = Complex64::default();
    for &p in products {
        acc += p;
        prefix.push(acc);
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Time-frequency wavelet coherence of two transforms on identical grids.
///
/// Per cell: |smoothed cross-spectrum| / sqrt(smoothed auto-spectra product).
/// Every value lies in [0, 1] up to floating-point rounding.
pub fn wavelet_coherence(
    wt_a: &WaveletTransform,
    wt_b: &WaveletTransform,
    smoothing: &SmoothingSpec,
) -> Result<Array2<f64>> {
    wt_a.check_same_grid(wt_b)?;
    let dt = wt_a.dt();
    let n_t = wt_a.n_times();
    let n_f = wt_a.freqs.len();
    for &f in &wt_a.freqs {
        if smoothing.window_len(f, dt) < 3 {
            return Err(Error::InvalidInput(format!(
                "smoothing window at {f} Hz is shorter than 3 samples; \
                 increase cycles or lower the frequency"
            )));
        }
    }
    let mut coh = Array2::<f64>::zeros((n_f, n_t));
    let mut cross = vec![Complex64::default(); n_t];
    let mut auto_a = vec![Complex64::default(); n_t];
    let mut auto_b = vec![Complex64::default(); n_t];
    for r in 0..n_f {
        let half = smoothing.half_window(wt_a.freqs[r], dt);
        for t in 0..n_t {
            let ca = wt_a.coefficients[[r, t]];
            let cb = wt_b.coefficients[[r, t]];
            cross[t] = ca * cb.conj();
            auto_a[t] = Complex64::new(ca.norm_sqr(), 0.0);
            auto_b[t] = Complex64::new(cb.norm_sqr(), 0.0);
        }
        let s_ab = smooth_row(&cross, half);
        let s_aa = smooth_row(&auto_a, half);
        let s_bb = smooth_row(&auto_b, half);
        for t in 0..n_t {
            let den = (s_aa[t].re * s_bb[t].re).sqrt();
            coh[[r, t]] = if den > 0.0 { s_ab[t].norm() / den } else { 0.0 };
        }
    }
    Ok(coh)
}

/// Interior column range for row `r` of a coherence matrix: outside the cone
/// of influence and clear of the smoothing window's edge truncation.
pub fn interior_columns(
    wt: &WaveletTransform,
    smoothing: &SmoothingSpec,
    row: usize,
) -> (usize, usize) {
    let dt = wt.dt();
    let margin = wt.coi_margins[row] + smoothing.half_window(wt.freqs[row], dt);
    let n = wt.n_times();
    if 2 * margin >= n {
        (0, 0)
    } else {
        (margin, n - margin)
    }
}

/// Frequency rows used to cover `band` at roughly 1 Hz spacing.
pub fn band_rows(band: (f64, f64)) -> Vec<f64> {
    let span = band.1 - band.0;
    let n_rows = (span.round() as usize + 1).max(9);
    (0..n_rows)
        .map(|i| band.0 + span * i as f64 / (n_rows - 1) as f64)
        .collect()
}

/// Pairwise wavelet coherence averaged over band rows and interior time
/// columns; symmetric with unit diagonal.
pub fn wc_matrix(
    rec: &Recording,
    band: (f64, f64),
    omega0: f64,
    smoothing: &SmoothingSpec,
) -> Result<ConnectivityMatrix> {
    let n_ch = rec.n_channels();
    let freqs = band_rows(band);
    let transforms: Vec<WaveletTransform> = (0..n_ch)
        .map(|c| morlet_cwt(&rec.channel(c), rec.sample_rate, &freqs, omega0))
        .collect::<Result<_>>()?;

    // interior window must be non-empty on every row
    for r in 0..freqs.len() {
        let (lo, hi) = interior_columns(&transforms[0], smoothing, r);
        if hi <= lo {
            return Err(Error::InvalidInput(format!(
                "recording too short for interior averaging at {} Hz \
                 (cone of influence and smoothing swallow every column)",
                freqs[r]
            )));
        }
    }

    let mut values = Array2::<f64>::zeros((n_ch, n_ch));
    for a in 0..n_ch {
        values[[a, a]] = 1.0;
        for b in a + 1..n_ch {
            let coh = wavelet_coherence(&transforms[a], &transforms[b], smoothing)?;
            let mut acc = 0.0;
            let mut count = 0usize;
            for r in 0..freqs.len() {
                let (lo, hi) = interior_columns(&transforms[a], smoothing, r);
                for t in lo..hi {
                    acc += coh[[r, t]];
                    count += 1;
                }
            }
            let v = (acc / count as f64).clamp(0.0, 1.0);
            values[[a, b]] = v;
            values[[b, a]] = v;
        }
    }
    ConnectivityMatrix::new(Metric::Wc, band, values, rec.channels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Session;
    use crate::rng::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise_recording(n: usize, n_ch: usize, fs: f64, seed: u64) -> Recording {
        let mut rng = seeded_rng(seed);
        let data = Array2::from_shape_fn((n, n_ch), |_| rng.sample::<f64, _>(StandardNormal));
        let channels = (0..n_ch).map(|i| format!("c{i}")).collect();
        Recording::new(fs, channels, data, "wc", Session::Pre).unwrap()
    }

    #[test]
    fn identical_inputs_have_unit_coherence() {
        let rec = noise_recording(4096, 2, 256.0, 1);
        let freqs = band_rows((13.0, 29.0));
        let wt = morlet_cwt(&rec.channel(0), 256.0, &freqs, 6.0).unwrap();
        let coh = wavelet_coherence(&wt, &wt, &SmoothingSpec::default()).unwrap();
        let smoothing = SmoothingSpec::default();
        for r in 0..freqs.len() {
            let (lo, hi) = interior_columns(&wt, &smoothing, r);
            assert!(hi > lo);
            for t in lo..hi {
                assert!((coh[[r, t]] - 1.0).abs() < 1e-9, "row {r} col {t}: {}", coh[[r, t]]);
            }
        }
    }

    #[test]
    fn coherence_never_exceeds_one() {
        for seed in 0..5 {
            let rec = noise_recording(2048, 2, 256.0, 100 + seed);
            let freqs = band_rows((13.0, 29.0));
            let a = morlet_cwt(&rec.channel(0), 256.0, &freqs, 6.0).unwrap();
            let b = morlet_cwt(&rec.channel(1), 256.0, &freqs, 6.0).unwrap();
            let coh = wavelet_coherence(&a, &b, &SmoothingSpec::default()).unwrap();
            for &v in coh.iter() {
                assert!((-1e-9..=1.0 + 1e-9).contains(&v), "coherence {v}");
            }
        }
    }

    #[test]
    fn independent_noise_has_modest_median_coherence() {
        let rec = noise_recording(60 * 256, 2, 256.0, 11);
        let freqs = band_rows((13.0, 29.0));
        let smoothing = SmoothingSpec::default();
        let a = morlet_cwt(&rec.channel(0), 256.0, &freqs, 6.0).unwrap();
        let b = morlet_cwt(&rec.channel(1), 256.0, &freqs, 6.0).unwrap();
        let coh = wavelet_coherence(&a, &b, &smoothing).unwrap();
        let mut interior = Vec::new();
        for r in 0..freqs.len() {
            let (lo, hi) = interior_columns(&a, &smoothing, r);
            for t in lo..hi {
                interior.push(coh[[r, t]]);
            }
        }
        interior.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let median = interior[interior.len() / 2];
        assert!(median < 0.35, "independent-noise median coherence {median}");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let rec = noise_recording(2048, 2, 256.0, 3);
        let a = morlet_cwt(&rec.channel(0), 256.0, &[10.0, 20.0], 6.0).unwrap();
        let b = morlet_cwt(&rec.channel(1), 256.0, &[10.0, 21.0], 6.0).unwrap();
        assert!(wavelet_coherence(&a, &b, &SmoothingSpec::default()).is_err());
    }

    #[test]
    fn too_short_smoothing_window_rejected() {
        let rec = noise_recording(2048, 2, 256.0, 4);
        let a = morlet_cwt(&rec.channel(0), 256.0, &[100.0], 6.0).unwrap();
        let b = morlet_cwt(&rec.channel(1), 256.0, &[100.0], 6.0).unwrap();
        let tiny = SmoothingSpec { cycles: 0.5 };
        assert!(wavelet_coherence(&a, &b, &tiny).is_err());
    }

    #[test]
    fn duplicated_channel_pair_entry_is_one() {
        let base = noise_recording(4096, 2, 256.0, 5);
        let data = Array2::from_shape_fn((4096, 2), |(r, _)| base.data[[r, 0]]);
        let rec = Recording::new(
            256.0,
            vec!["a".into(), "a_copy".into()],
            data,
            "dup",
            Session::Pre,
        )
        .unwrap();
        let m = wc_matrix(&rec, (13.0, 29.0), 6.0, &SmoothingSpec::default()).unwrap();
        assert!((m.values[[0, 1]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coupled_sinusoids_dominate_band() {
        let rec =
            crate::synth::generate_coupled_sinusoids(20.0, 1e6, 3, 30 * 256, 256.0, 6).unwrap();
        let m = wc_matrix(&rec, (13.0, 29.0), 6.0, &SmoothingSpec::default()).unwrap();
        assert!(m.values[[0, 1]] > 0.8, "coupled WC {}", m.values[[0, 1]]);
    }

    #[test]
    fn matrix_shape_follows_channel_count() {
        let rec = noise_recording(3072, 4, 256.0, 8);
        let m = wc_matrix(&rec, (13.0, 29.0), 6.0, &SmoothingSpec::default()).unwrap();
        assert_eq!(m.values.dim(), (4, 4));
        for i in 0..4 {
            assert_eq!(m.values[[i, i]], 1.0);
        }
    }
}
