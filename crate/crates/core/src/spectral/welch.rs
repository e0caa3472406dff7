//! Welch-averaged auto- and cross-spectral density estimation.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::recording::Recording;
use crate::spectral::CrossSpectralDensity;

/// Default analysis window: 2 s at the recording's rate (0.5 Hz resolution).
pub fn default_window_len(sample_rate: f64) -> usize {
    (2.0 * sample_rate).round() as usize
}

/// Default segment overlap fraction.
pub const DEFAULT_OVERLAP: f64 = 0.5;

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / len as f64;
            x.sin().powi(2)
        })
        .collect()
}

/// Hann-windowed, overlapped, averaged cross-spectra of all channel pairs.
///
/// Scaling is one-sided spectral density: summing `S_aa(f) * df` over the
/// frequency axis approximates the variance of channel a. Each segment has
/// its mean removed before windowing.
pub fn welch_csd(rec: &Recording, window_len: usize, overlap: f64) -> Result<CrossSpectralDensity> {
    let n = rec.n_samples();
    let n_ch = rec.n_channels();
    if window_len < 8 {
        return Err(Error::InvalidInput(format!(
            "window_len {window_len} too small (minimum 8)"
        )));
    }
    if window_len > n {
        return Err(Error::InvalidInput(format!(
            "window_len {window_len} exceeds recording length {n}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidInput(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    let step = ((window_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let n_segments = (n - window_len) / step + 1;
    if n_segments < 2 {
        return Err(Error::InvalidInput(format!(
            "only {n_segments} segment(s) fit; need at least 2 (shorten the window or add data)"
        )));
    }

    let window = hann(window_len);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fs = rec.sample_rate;
    let n_bins = window_len / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(window_len);

    // per-segment spectra of every channel, then averaged outer products
    let mut acc: Vec<Array2<Complex64>> =
        vec![Array2::zeros((n_ch, n_ch)); n_bins];
    let mut spectra: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); n_bins]; n_ch];
    let mut buf = vec![Complex64::default(); window_len];

    for seg in 0..n_segments {
        let start = seg * step;
        for ch in 0..n_ch {
            let col = rec.data.column(ch);
            let mut mean = 0.0;
            for t in 0..window_len {
                mean += col[start + t];
            }
            mean /= window_len as f64;
            for t in 0..window_len {
                buf[t] = Complex64::new((col[start + t] - mean) * window[t], 0.0);
            }
            fft.process(&mut buf);
            spectra[ch][..n_bins].copy_from_slice(&buf[..n_bins]);
        }
        for k in 0..n_bins {
            let m = &mut acc[k];
            for a in 0..n_ch {
                let xa = spectra[a][k];
                for b in a..n_ch {
                    let v = xa * spectra[b][k].conj();
                    m[[a, b]] += v;
                }
            }
        }
    }

    // density normalization, one-sided doubling (except DC / Nyquist),
    // Hermitian completion
    let norm = 1.0 / (n_segments as f64 * fs * win_power);
    let nyquist_bin = if window_len % 2 == 0 { Some(n_bins - 1) } else { None };
    for (k, m) in acc.iter_mut().enumerate() {
        let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
        let scale = norm * one_sided;
        for a in 0..n_ch {
            for b in a..n_ch {
                let v = m[[a, b]] * scale;
                m[[a, b]] = v;
                if a != b {
                    m[[b, a]] = v.conj();
                } else {
                    // diagonal is an average of |X|^2: real and non-negative
                    m[[a, a]] = Complex64::new(v.re.max(0.0), 0.0);
                }
            }
        }
    }

    let freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * fs / window_len as f64)
        .collect();

    Ok(CrossSpectralDensity {
        freqs,
        matrices: acc,
        n_segments,
        window_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Session;
    use crate::rng::seeded_rng;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white_noise(n: usize, n_ch: usize, fs: f64, seed: u64) -> Recording {
        let mut rng = seeded_rng(seed);
        let data = Array2::from_shape_fn((n, n_ch), |_| rng.sample::<f64, _>(StandardNormal));
        let channels = (0..n_ch).map(|i| format!("c{i}")).collect();
        Recording::new(fs, channels, data, "wn", Session::Pre).unwrap()
    }

    #[test]
    fn white_noise_psd_is_flat() {
        // 100 segments of 512 samples at 50% overlap
        let n = 99 * 256 + 512;
        let rec = white_noise(n, 2, 256.0, 1);
        let csd = welch_csd(&rec, 512, 0.5).unwrap();
        assert!(csd.n_segments >= 100);
        let bins = csd.band_bins(1.0, 100.0);
        let vals: Vec<f64> = bins.iter().map(|&k| csd.matrices[k][[0, 0]].re).collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 3.0, "flatness ratio {}", max / min);
    }

    #[test]
    fn psd_integrates_to_variance() {
        let rec = white_noise(20_000, 2, 256.0, 2);
        let csd = welch_csd(&rec, 512, 0.5).unwrap();
        let df = csd.freqs[1] - csd.freqs[0];
        let total: f64 = csd.matrices.iter().map(|m| m[[0, 0]].re).sum::<f64>() * df;
        let x = rec.channel(0);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(
            (total - var).abs() / var < 0.1,
            "spectral mass {total} vs variance {var}"
        );
    }

    #[test]
    fn cross_spectrum_of_channel_with_itself_is_auto_spectrum() {
        let mut rng = seeded_rng(3);
        let n = 4096;
        let col: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Array2::from_shape_fn((n, 2), |(r, _)| col[r]);
        let rec = Recording::new(
            256.0,
            vec!["x".into(), "x_copy".into()],
            data,
            "dup",
            Session::Pre,
        )
        .unwrap();
        let csd = welch_csd(&rec, 512, 0.5).unwrap();
        for m in &csd.matrices {
            assert!((m[[0, 1]] - m[[0, 0]]).norm() < 1e-12 * (1.0 + m[[0, 0]].norm()));
        }
    }

    #[test]
    fn sinusoid_peaks_at_nearest_bin() {
        let rec = crate::synth::generate_coupled_sinusoids(20.0, 1e8, 0, 16_384, 256.0, 5).unwrap();
        let csd = welch_csd(&rec, 512, 0.5).unwrap();
        let peak = csd
            .matrices
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a[[0, 0]].re.partial_cmp(&b[[0, 0]].re).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        let expected = (20.0f64 * 512.0 / 256.0).round() as usize;
        assert_eq!(peak, expected);
    }

    #[test]
    fn hermitian_within_tolerance() {
        let rec = white_noise(8192, 3, 256.0, 7);
        let csd = welch_csd(&rec, 256, 0.5).unwrap();
        for m in &csd.matrices {
            for a in 0..3 {
                assert!(m[[a, a]].im == 0.0 && m[[a, a]].re >= 0.0);
                for b in 0..3 {
                    let d = (m[[a, b]] - m[[b, a]].conj()).norm();
                    assert!(d <= 1e-10 * (1.0 + m[[a, b]].norm()));
                }
            }
        }
    }

    #[test]
    fn more_segments_mean_less_variance() {
        // same data length, 64 vs 4 segments; deviation from the known flat
        // level should shrink in at least 90% of trials
        let fs = 256.0;
        let mut wins = 0;
        let trials = 20;
        for seed in 0..trials {
            let n = 16_384;
            let rec = white_noise(n, 2, fs, 100 + seed);
            let coarse = welch_csd(&rec, n / 4, 0.0).unwrap();
            let fine = welch_csd(&rec, n / 64, 0.0).unwrap();
            let level = 2.0 / fs; // one-sided density of unit-variance white noise
            let dev = |csd: &CrossSpectralDensity| {
                let bins = csd.band_bins(4.0, 100.0);
                let m = bins.len() as f64;
                bins.iter()
                    .map(|&k| (csd.matrices[k][[0, 0]].re - level).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / m.sqrt()
            };
            if dev(&fine) < dev(&coarse) {
                wins += 1;
            }
        }
        assert!(wins * 10 >= trials * 9, "fine estimate won only {wins}/{trials}");
    }

    #[test]
    fn input_validation() {
        let rec = white_noise(256, 2, 256.0, 1);
        assert!(welch_csd(&rec, 4, 0.5).is_err());
        assert!(welch_csd(&rec, 512, 0.5).is_err());
        assert!(welch_csd(&rec, 256, 0.5).is_err()); // single segment
        assert!(welch_csd(&rec, 128, 1.0).is_err());
    }
}
