//! Multivariate autoregressive fitting and partial directed coherence.
//!
//! The model is A(t) = sum_r C_r A(t-r) + w(t); PDC at normalized frequency f
//! column-normalizes the frequency-domain coefficient matrix
//! Abar(f) = I - sum_r C_r exp(-i 2 pi f r), so that the squared magnitudes in
//! every column sum to one.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::connectivity::{ConnectivityMatrix, Metric};
use crate::error::{Error, Result};
use crate::linalg;
use crate::recording::Recording;
use crate::synth::VarGroundTruth;

/// Frequencies evaluated when averaging PDC over a band.
pub const PDC_BAND_POINTS: usize = 64;

/// Default upper bound for automatic order selection.
pub const DEFAULT_MAX_ORDER: usize = 20;

/// A fitted (or constructed) autoregressive model over labeled channels.
#[derive(Debug, Clone)]
pub struct MvarModel {
    pub order: usize,
    /// `coefficients[r-1][(i, j)]` scales channel j at lag r onto channel i.
    pub coefficients: Vec<Array2<f64>>,
    pub noise_covariance: Array2<f64>,
    pub n_samples_fit: usize,
    /// Companion spectral radius; a value >= 1 marks a non-stationary fit.
    pub spectral_radius: f64,
    pub channel_labels: Vec<String>,
}

impl MvarModel {
    /// Wraps explicit coefficient matrices as a model (e.g. a known ground truth).
    pub fn from_coefficients(
        coefficients: Vec<Array2<f64>>,
        noise_covariance: Array2<f64>,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("need at least one lag matrix".into()));
        }
        let n = coefficients[0].nrows();
        let radius = crate::synth::check_var_stability(&coefficients)?;
        Ok(MvarModel {
            order: coefficients.len(),
            coefficients,
            noise_covariance,
            n_samples_fit: 0,
            spectral_radius: radius,
            channel_labels: (1..=n).map(|i| format!("ch{i}")).collect(),
        })
    }

    pub fn from_ground_truth(gt: &VarGroundTruth) -> Result<Self> {
        Self::from_coefficients(gt.coefficients.clone(), gt.noise_covariance.clone())
    }

    pub fn n_channels(&self) -> usize {
        self.coefficients[0].nrows()
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Lag-regression Gram blocks shared by fitting and order selection.
struct LagGram {
    /// predictors-by-predictors, lag-major ordering (lag 1 block first)
    xtx: DMatrix<f64>,
    /// predictors-by-targets
    xty: DMatrix<f64>,
    /// targets-by-targets
    yty: DMatrix<f64>,
    n_rows: usize,
    n_channels: usize,
}

fn lag_gram(rec: &Recording, p: usize, offset: usize) -> LagGram {
    let n = rec.n_channels();
    let t_total = rec.n_samples();
    let d = n * p;
    let n_rows = t_total - offset;
    let mut x = DMatrix::<f64>::zeros(n_rows, d);
    let mut y = DMatrix::<f64>::zeros(n_rows, n);
    for (row, t) in (offset..t_total).enumerate() {
        for r in 0..p {
            for j in 0..n {
                x[(row, r * n + j)] = rec.data[[t - r - 1, j]];
            }
        }
        for i in 0..n {
            y[(row, i)] = rec.data[[t, i]];
        }
    }
    LagGram {
        xtx: x.transpose() * &x,
        xty: x.transpose() * &y,
        yty: y.transpose() * &y,
        n_rows,
        n_channels: n,
    }
}

/// Solves the order-p least squares from the Gram blocks; returns the
/// stacked coefficient matrix (predictors x targets) and the residual
/// scatter E'E (targets x targets).
fn solve_order(gram: &LagGram, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = gram.n_channels;
    let d = n * p;
    let xtx = gram.xtx.view((0, 0), (d, d)).into_owned();
    let xty = gram.xty.view((0, 0), (d, n)).into_owned();
    let chol = xtx.cholesky().ok_or_else(|| {
        Error::Numerical(
            "rank-deficient lag regression (constant or duplicate channel?)".into(),
        )
    })?;
    let beta = chol.solve(&xty);
    let mut scatter = &gram.yty - xty.transpose() * &beta;
    // symmetrize rounding residue
    let st = scatter.transpose();
    scatter = (scatter + st) * 0.5;
    Ok((beta, scatter))
}

fn unstack_coefficients(beta: &DMatrix<f64>, n: usize, p: usize) -> Vec<Array2<f64>> {
    (0..p)
        .map(|r| Array2::from_shape_fn((n, n), |(i, j)| beta[(r * n + j, i)]))
        .collect()
}

fn check_fit_preconditions(rec: &Recording, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidInput("model order must be >= 1".into()));
    }
    let need = 10 * rec.n_channels() * p;
    if rec.n_samples() < need {
        return Err(Error::InvalidInput(format!(
            "{} samples are too few to fit order {p} over {} channels (need >= {need})",
            rec.n_samples(),
            rec.n_channels()
        )));
    }
    Ok(())
}

/// Least-squares fit of an order-p autoregressive model.
pub fn fit_mvar(rec: &Recording, p: usize) -> Result<MvarModel> {
    check_fit_preconditions(rec, p)?;
    let n = rec.n_channels();
    let gram = lag_gram(rec, p, p);
    let (beta, scatter) = solve_order(&gram, p)?;
    let coefficients = unstack_coefficients(&beta, n, p);
    let df = gram.n_rows.saturating_sub(n * p).max(1) as f64;
    let noise_covariance = linalg::from_na(&(&scatter / df));
    let radius = crate::synth::check_var_stability(&coefficients)?;
    if radius >= 1.0 {
        log::warn!(
            "fitted autoregressive model is non-stationary (spectral radius {radius:.4})"
        );
    }
    Ok(MvarModel {
        order: p,
        coefficients,
        noise_covariance,
        n_samples_fit: gram.n_rows,
        spectral_radius: radius,
        channel_labels: rec.channels.clone(),
    })
}

/// Akaike information criterion over orders 1..=p_max; ties toward smaller p.
///
/// All candidate orders are scored on the same regression rows (those from
/// `p_max` on) so their likelihoods are comparable.
pub fn select_order(rec: &Recording, p_max: usize) -> Result<usize> {
    check_fit_preconditions(rec, p_max)?;
    let n = rec.n_channels();
    let gram = lag_gram(rec, p_max, p_max);
    let t_eff = gram.n_rows as f64;
    let mut best_p = 0usize;
    let mut best_aic = f64::INFINITY;
    for p in 1..=p_max {
        let (_, scatter) = solve_order(&gram, p)?;
        let sigma_ml = &scatter / t_eff;
        let chol = sigma_ml.clone().cholesky().ok_or_else(|| {
            Error::Numerical(format!("singular residual covariance at order {p}"))
        })?;
        // ln det via the Cholesky factor
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let aic = log_det + 2.0 * (p * n * n) as f64 / t_eff;
        if aic < best_aic - 0.0 {
            best_aic = aic;
            best_p = p;
        }
    }
    Ok(best_p)
}

/// Frequency-domain coefficient matrix Abar(f) at normalized frequency f.
fn abar_at(model: &MvarModel, f: f64) -> Array2<Complex64> {
    let n = model.n_channels();
    let mut m = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = Complex64::new(1.0, 0.0);
    }
    for (r, coef) in model.coefficients.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * (r + 1) as f64);
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] -= coef[[i, j]] * phase;
            }
        }
    }
    m
}

/// Partial directed coherence at each normalized frequency (cycles/sample,
/// in [0, 0.5]). Every column of each returned matrix satisfies
/// sum_i |e_ij|^2 = 1.
pub fn pdc_spectrum(model: &MvarModel, freqs: &[f64]) -> Result<Vec<Array2<Complex64>>> {
    if freqs.is_empty() {
        return Err(Error::InvalidInput("empty frequency list".into()));
    }
    for &f in freqs {
        if !(0.0..=0.5).contains(&f) {
            return Err(Error::InvalidInput(format!(
                "normalized frequency {f} outside [0, 0.5]"
            )));
        }
    }
    let n = model.n_channels();
    let mut out = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let abar = abar_at(model, f);
        let mut eps = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            let norm_sq: f64 = (0..n).map(|i| abar[[i, j]].norm_sqr()).sum();
            if !(norm_sq > 0.0) {
                return Err(Error::Numerical(format!(
                    "zero column norm in Abar at frequency {f}, column {j}"
                )));
            }
            let inv = 1.0 / norm_sq.sqrt();
            for i in 0..n {
                eps[[i, j]] = abar[[i, j]] * inv;
            }
        }
        out.push(eps);
    }
    Ok(out)
}

/// PDC magnitudes averaged over [`PDC_BAND_POINTS`] evenly spaced frequencies
/// in `band` (Hz, converted by `fs` to cycles/sample). Entry (i, j) is the
/// influence of channel j on channel i.
pub fn pdc_matrix(model: &MvarModel, band: (f64, f64), fs: f64) -> Result<ConnectivityMatrix> {
    if !(band.0 < band.1) || band.1 >= fs / 2.0 || band.0 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "band ({}, {}) must lie inside [0, {})",
            band.0,
            band.1,
            fs / 2.0
        )));
    }
    let freqs: Vec<f64> = (0..PDC_BAND_POINTS)
        .map(|k| {
            let f_hz = band.0 + (band.1 - band.0) * k as f64 / (PDC_BAND_POINTS - 1) as f64;
            f_hz / fs
        })
        .collect();
    let spectra = pdc_spectrum(model, &freqs)?;
    let n = model.n_channels();
    let mut values = Array2::<f64>::zeros((n, n));
    let inv = 1.0 / spectra.len() as f64;
    for eps in &spectra {
        for i in 0..n {
            for j in 0..n {
                values[[i, j]] += eps[[i, j]].norm() * inv;
            }
        }
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    ConnectivityMatrix::new(Metric::Pdc, band, values, model.channel_labels.clone())
}
