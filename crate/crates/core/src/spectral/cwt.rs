//! Analytic Morlet continuous wavelet transform.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::WaveletTransform;

/// Default mother-wavelet center frequency parameter.
pub const DEFAULT_OMEGA0: f64 = 6.0;

/// Scale (in samples) of the Morlet atom tuned to `freq` Hz.
pub fn scale_for(freq: f64, fs: f64, omega0: f64) -> f64 {
    omega0 * fs / (2.0 * std::f64::consts::PI * freq)
}

/// Complex Morlet transform of a single channel on a caller-supplied
/// frequency grid. Coefficients are computed by FFT convolution with
/// zero padding; the relative magnitudes across time/frequency are what
/// downstream coherence uses, so the atoms are L2-normalized.
pub fn morlet_cwt(
    samples: &[f64],
    fs: f64,
    freqs: &[f64],
    omega0: f64,
) -> Result<WaveletTransform> {
    if freqs.is_empty() {
        return Err(Error::InvalidInput("empty frequency list".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    if !(fs > 0.0) {
        return Err(Error::InvalidInput(format!("bad sample rate {fs}")));
    }
    if omega0 < 5.0 {
        return Err(Error::InvalidInput(format!(
            "omega0 {omega0} too small; analytic Morlet needs omega0 >= 5"
        )));
    }
    for w in freqs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(
                "frequencies must be strictly ascending".into(),
            ));
        }
    }
    if freqs[0] <= 0.0 || *freqs.last().unwrap() >= fs / 2.0 {
        return Err(Error::InvalidInput(format!(
            "frequencies must lie in (0, {}), got [{}, {}]",
            fs / 2.0,
            freqs[0],
            freqs.last().unwrap()
        )));
    }

    let n = samples.len();
    // largest kernel decides the padded FFT size
    let max_scale = scale_for(freqs[0], fs, omega0);
    let max_half = (5.0 * max_scale).ceil() as usize;
    let fft_len = (n + 2 * max_half + 1).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut sig = vec![Complex64::default(); fft_len];
    for (t, &v) in samples.iter().enumerate() {
        sig[t] = Complex64::new(v, 0.0);
    }
    fft.process(&mut sig);

    let norm_pi = std::f64::consts::PI.powf(-0.25);
    let mut coefficients = Array2::<Complex64>::zeros((freqs.len(), n));
    let mut coi_margins = Vec::with_capacity(freqs.len());
    let mut kernel = vec![Complex64::default(); fft_len];

    for (row, &f) in freqs.iter().enumerate() {
        let s = scale_for(f, fs, omega0);
        let half = (5.0 * s).ceil() as usize;
        kernel.iter_mut().for_each(|v| *v = Complex64::default());
        // conjugate-reversed atom so the FFT product computes the correlation
        // sum_u x[u] * conj(atom((u - t)/s)); tap for offset d = u - t goes to
        // circular index (-d mod fft_len)
        for d in -(half as i64)..=(half as i64) {
            let x = d as f64 / s;
            let env = (-0.5 * x * x).exp();
            let atom = Complex64::from_polar(norm_pi * env / s.sqrt(), omega0 * x);
            let idx = (-d).rem_euclid(fft_len as i64) as usize;
            kernel[idx] = atom.conj();
        }
        fft.process(&mut kernel);
        for (k, v) in kernel.iter_mut().enumerate() {
            *v *= sig[k];
        }
        ifft.process(&mut kernel);
        let scale_back = 1.0 / fft_len as f64;
        for t in 0..n {
            coefficients[[row, t]] = kernel[t] * scale_back;
        }
        // cone of influence: e-folding time sqrt(2)*s of the Gaussian envelope
        coi_margins.push(((2.0f64).sqrt() * s).ceil() as usize);
    }

    let times: Vec<f64> = (0..n).map(|t| t as f64 / fs).collect();
    Ok(WaveletTransform {
        freqs: freqs.to_vec(),
        times,
        coefficients,
        omega0,
        coi_margins,
    })
}
