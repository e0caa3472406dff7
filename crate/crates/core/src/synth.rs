//! Synthetic recordings with known ground truth: stable vector-autoregressive
//! processes and coupled sinusoid pairs. These are the validation fixtures for
//! every connectivity estimator in the crate.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::recording::{Recording, Session};
use crate::rng::seeded_rng;

/// Margin below 1.0 that a companion spectral radius must clear.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Default number of initial samples discarded to wash out the zero initial state.
pub const DEFAULT_BURN_IN: usize = 1000;

/// A fully specified stable VAR(p) process.
///
/// `coefficients[r-1]` is the lag-r matrix; entry (i, j) scales the influence
/// of channel j at lag r on channel i now. `noise_covariance` is the
/// covariance of the innovation vector.
#[derive(Debug, Clone)]
pub struct VarGroundTruth {
    pub order: usize,
    pub coefficients: Vec<Array2<f64>>,
    pub noise_covariance: Array2<f64>,
    pub seed: u64,
}

impl VarGroundTruth {
    pub fn new(coefficients: Vec<Array2<f64>>, noise_covariance: Array2<f64>, seed: u64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("need at least one lag matrix".into()));
        }
        let gt = VarGroundTruth {
            order: coefficients.len(),
            coefficients,
            noise_covariance,
            seed,
        };
        gt.validate()?;
        Ok(gt)
    }

    pub fn n_channels(&self) -> usize {
        self.coefficients[0].nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coefficients[0].nrows();
        for (r, m) in self.coefficients.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "lag-{} matrix is {}x{}, expected {n}x{n}",
                    r + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let radius = check_var_stability(&self.coefficients)?;
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable { radius });
        }
        linalg::check_spd(&self.noise_covariance, 1e-12)?;
        if self.noise_covariance.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance is {}x{}, expected {n}x{n}",
                self.noise_covariance.nrows(),
                self.noise_covariance.ncols()
            )));
        }
        Ok(())
    }
}

/// Spectral radius of the (n*p)x(n*p) companion matrix of a lag-matrix stack.
pub fn check_var_stability(coefficients: &[Array2<f64>]) -> Result<f64> {
    if coefficients.is_empty() {
        return Err(Error::InvalidInput("empty coefficient list".into()));
    }
    let n = coefficients[0].nrows();
    for (r, m) in coefficients.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "lag-{} matrix is {}x{}, expected {n}x{n}",
                r + 1,
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let p = coefficients.len();
    let dim = n * p;
    let mut companion = DMatrix::<f64>::zeros(dim, dim);
    for (r, m) in coefficients.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                companion[(i, r * n + j)] = m[[i, j]];
            }
        }
    }
    for k in 0..dim - n {
        companion[(n + k, k)] = 1.0;
    }
    Ok(linalg::spectral_radius(&companion))
}

/// Sample rate stamped on simulated recordings by [`generate_var`].
pub const DEFAULT_SAMPLE_RATE: f64 = 256.0;

/// Simulates `n_samples` rows of the VAR recursion after discarding `burn_in`
/// initial samples. Deterministic in `gt.seed`. The recording is stamped with
/// [`DEFAULT_SAMPLE_RATE`]; use [`generate_var_at`] for a different rate.
pub fn generate_var(gt: &VarGroundTruth, n_samples: usize, burn_in: usize) -> Result<Recording> {
    generate_var_at(gt, n_samples, burn_in, DEFAULT_SAMPLE_RATE)
}

/// [`generate_var`] with an explicit sample rate.
pub fn generate_var_at(
    gt: &VarGroundTruth,
    n_samples: usize,
    burn_in: usize,
    sample_rate: f64,
) -> Result<Recording> {
    gt.validate()?;
    let n = gt.n_channels();
    let p = gt.order;
    if n_samples < 10 * p {
        return Err(Error::InvalidInput(format!(
            "n_samples {n_samples} too small for order {p} (need at least {})",
            10 * p
        )));
    }
    let chol = linalg::cholesky_lower(&gt.noise_covariance)?;
    let mut rng = seeded_rng(gt.seed);

    let total = burn_in + n_samples;
    let mut data = Array2::<f64>::zeros((total, n));
    let mut noise = vec![0.0f64; n];
    let mut shaped = vec![0.0f64; n];
    for t in 0..total {
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += chol[(i, j)] * noise[j];
            }
            shaped[i] = acc;
        }
        for i in 0..n {
            let mut x = shaped[i];
            for (r, coef) in gt.coefficients.iter().enumerate() {
                if t > r {
                    let row = t - r - 1;
                    for j in 0..n {
                        x += coef[[i, j]] * data[[row, j]];
                    }
                }
            }
            data[[t, i]] = x;
        }
    }
    let kept = data.slice(ndarray::s![burn_in.., ..]).to_owned();
    let channels = (1..=n).map(|i| format!("ch{i}")).collect();
    Recording::new(sample_rate, channels, kept, "var-synth", Session::Pre)
}

/// Two channels sharing one sinusoidal component: channel 2 is channel 1's
/// sinusoid delayed by `lag` samples; each channel carries independent
/// Gaussian noise sized so that sinusoid power / noise power = `snr`.
/// `snr = f64::INFINITY` yields noiseless channels.
pub fn generate_coupled_sinusoids(
    f0: f64,
    snr: f64,
    lag: i64,
    n_samples: usize,
    fs: f64,
    seed: u64,
) -> Result<Recording> {
    if !(f0 > 0.0) || f0 >= fs / 2.0 {
        return Err(Error::InvalidInput(format!(
            "sinusoid frequency {f0} Hz must lie in (0, {}) for fs {fs}",
            fs / 2.0
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidInput(format!("snr must be positive, got {snr}")));
    }
    // unit sinusoid has power 1/2
    let noise_std = if snr.is_infinite() { 0.0 } else { (0.5 / snr).sqrt() };
    let mut rng = seeded_rng(seed);
    let w = 2.0 * std::f64::consts::PI * f0 / fs;
    let mut data = Array2::<f64>::zeros((n_samples, 2));
    for t in 0..n_samples {
        let s = (w * t as f64).sin();
        let s_lag = (w * (t as f64 - lag as f64)).sin();
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        data[[t, 0]] = s + noise_std * n1;
        data[[t, 1]] = s_lag + noise_std * n2;
    }
    Recording::new(
        fs,
        vec!["ch1".into(), "ch2".into()],
        data,
        "sinusoid-synth",
        Session::Pre,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..n {
            den += (x[t] - mean).powi(2);
            if t + 1 < n {
                num += (x[t] - mean) * (x[t + 1] - mean);
            }
        }
        num / den
    }

    #[test]
    fn stability_of_zero_coefficients_is_zero() {
        let coef = vec![Array2::<f64>::zeros((3, 3))];
        assert_eq!(check_var_stability(&coef).unwrap(), 0.0);
    }

    #[test]
    fn stability_univariate_is_the_scalar() {
        let coef = vec![array![[0.5]]];
        assert!((check_var_stability(&coef).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stability_bivariate_diagonal() {
        let coef = vec![array![[0.9, 0.0], [0.0, 0.2]]];
        assert!((check_var_stability(&coef).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn stability_rejects_dimension_mismatch() {
        let coef = vec![array![[0.5, 0.0], [0.0, 0.5]], array![[0.1]]];
        assert!(check_var_stability(&coef).is_err());
    }

    #[test]
    fn unstable_ground_truth_is_rejected_with_radius() {
        let err = VarGroundTruth::new(vec![array![[1.01]]], array![[1.0]], 0).unwrap_err();
        match err {
            Error::Unstable { radius } => assert!((radius - 1.01).abs() < 1e-9),
            other => panic!("expected Unstable, got {other:?}"),
        }
    }

    #[test]
    fn white_noise_has_no_lag1_structure() {
        let gt = VarGroundTruth::new(
            vec![Array2::<f64>::zeros((2, 2))],
            Array2::<f64>::eye(2),
            11,
        )
        .unwrap();
        let rec = generate_var(&gt, 10_000, 200).unwrap();
        for c in 0..2 {
            let rho = lag1_autocorr(&rec.channel(c));
            assert!(rho.abs() < 0.05, "lag-1 autocorr {rho} outside +/-0.05");
        }
    }

    #[test]
    fn ar1_lag1_autocorrelation_matches_coefficient() {
        // ρ(1) = φ for AR(1); simulate as a 2-channel system with independent channels
        let gt = VarGroundTruth::new(
            vec![array![[0.5, 0.0], [0.0, 0.5]]],
            Array2::<f64>::eye(2),
            7,
        )
        .unwrap();
        let rec = generate_var(&gt, 10_000, 1000).unwrap();
        let rho = lag1_autocorr(&rec.channel(0));
        assert!((rho - 0.5).abs() < 0.05, "lag-1 autocorr {rho}, expected 0.5");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let gt = VarGroundTruth::new(
            vec![array![[0.3, 0.1], [0.0, 0.4]]],
            Array2::<f64>::eye(2),
            99,
        )
        .unwrap();
        let a = generate_var(&gt, 500, 100).unwrap();
        let b = generate_var(&gt, 500, 100).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn generated_mean_is_near_zero() {
        let gt = VarGroundTruth::new(
            vec![array![[0.5, 0.2], [0.1, 0.3]]],
            Array2::<f64>::eye(2),
            5,
        )
        .unwrap();
        let rec = generate_var(&gt, 10_000, 1000).unwrap();
        for c in 0..2 {
            let x = rec.channel(c);
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            // process is autocorrelated; allow a generous factor on the iid standard error
            let se = (var / n).sqrt();
            assert!(mean.abs() < 5.0 * se * 3.0, "mean {mean} vs se {se}");
        }
    }

    #[test]
    fn near_unit_root_is_rejected() {
        let err = VarGroundTruth::new(
            vec![array![[1.0 - 1e-12, 0.0], [0.0, 0.1]]],
            Array2::<f64>::eye(2),
            0,
        );
        assert!(matches!(err, Err(Error::Unstable { .. })));
    }

    #[test]
    fn coupled_sinusoids_identical_at_infinite_snr() {
        let rec = generate_coupled_sinusoids(20.0, f64::INFINITY, 0, 512, 256.0, 3).unwrap();
        for t in 0..512 {
            assert_eq!(rec.data[[t, 0]], rec.data[[t, 1]]);
        }
    }

    #[test]
    fn coupled_sinusoids_peak_at_f0() {
        // direct DFT magnitude at each bin, no library FFT involved
        let rec = generate_coupled_sinusoids(20.0, 1e6, 0, 1024, 256.0, 4).unwrap();
        let x = rec.channel(0);
        let n = x.len();
        let mut best_bin = 0;
        let mut best_mag = 0.0;
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let mag = (re * re + im * im).sqrt();
            if mag > best_mag {
                best_mag = mag;
                best_bin = k;
            }
        }
        let expected = (20.0 * n as f64 / 256.0).round() as usize;
        assert_eq!(best_bin, expected);
    }

    #[test]
    fn coupled_sinusoids_deterministic() {
        let a = generate_coupled_sinusoids(10.0, 4.0, 3, 256, 128.0, 123).unwrap();
        let b = generate_coupled_sinusoids(10.0, 4.0, 3, 256, 128.0, 123).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn sinusoid_above_nyquist_is_rejected() {
        assert!(generate_coupled_sinusoids(130.0, 1.0, 0, 256, 256.0, 0).is_err());
    }
}
