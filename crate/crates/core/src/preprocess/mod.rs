//! Preprocessing chain: zero-phase band-pass and notch filtering,
//! re-referencing to a reference-channel average, and baseline correction.

pub mod butterworth;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::recording::Recording;
use butterworth::{design_bandpass, design_bandstop, SosFilter};

/// Default prototype order for the band-pass design.
pub const BANDPASS_ORDER: usize = 6;
/// Default prototype order for the notch (band-stop) design.
pub const NOTCH_ORDER: usize = 4;
/// Default total stopband width of the notch, Hz.
pub const NOTCH_BANDWIDTH: f64 = 4.0;

/// Filter request with its validity rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    Bandpass { low_cut: f64, high_cut: f64, order: usize },
    Notch { center: f64, order: usize },
}

impl FilterSpec {
    /// Validates cutoffs against a concrete sample rate.
    pub fn validate(&self, fs: f64) -> Result<()> {
        match *self {
            FilterSpec::Bandpass { low_cut, high_cut, order } => {
                if !(low_cut > 0.0 && low_cut < high_cut && high_cut < fs / 2.0) {
                    return Err(Error::InvalidInput(format!(
                        "band-pass requires 0 < low < high < fs/2; got ({low_cut}, {high_cut}) at fs {fs}"
                    )));
                }
                if order == 0 {
                    return Err(Error::InvalidInput("band-pass order must be >= 1".into()));
                }
            }
            FilterSpec::Notch { center, order } => {
                if !(center > 0.0 && center < fs / 2.0) {
                    return Err(Error::InvalidInput(format!(
                        "notch center {center} must lie in (0, fs/2) at fs {fs}"
                    )));
                }
                if order < 2 || order % 2 != 0 {
                    return Err(Error::InvalidInput(format!(
                        "notch order must be even and >= 2, got {order}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn design(&self, fs: f64) -> Result<SosFilter> {
        self.validate(fs)?;
        match *self {
            FilterSpec::Bandpass { low_cut, high_cut, order } => {
                design_bandpass(low_cut, high_cut, fs, order)
            }
            FilterSpec::Notch { center, order } => {
                design_bandstop(center, NOTCH_BANDWIDTH, fs, order)
            }
        }
    }
}

fn filter_recording(rec: &Recording, spec: &FilterSpec) -> Result<Recording> {
    let filter = spec.design(rec.sample_rate)?;
    let mut out = Array2::<f64>::zeros(rec.data.dim());
    for c in 0..rec.n_channels() {
        let filtered = filter.filtfilt(&rec.channel(c))?;
        for (r, v) in filtered.into_iter().enumerate() {
            out[[r, c]] = v;
        }
    }
    Ok(rec.with_data(out))
}

/// Zero-phase Butterworth band-pass over `[low, high]` Hz.
pub fn bandpass_filter(rec: &Recording, low: f64, high: f64) -> Result<Recording> {
    filter_recording(
        rec,
        &FilterSpec::Bandpass {
            low_cut: low,
            high_cut: high,
            order: BANDPASS_ORDER,
        },
    )
}

/// Zero-phase notch at `center` Hz (stopband width [`NOTCH_BANDWIDTH`]).
pub fn notch_filter(rec: &Recording, center: f64) -> Result<Recording> {
    filter_recording(
        rec,
        &FilterSpec::Notch {
            center,
            order: NOTCH_ORDER,
        },
    )
}

/// Subtracts the per-sample mean of the named reference channels from every
/// channel. The reference channels stay in the output (their re-referenced
/// values are retained).
pub fn rereference_average(rec: &Recording, reference_labels: &[String]) -> Result<Recording> {
    if reference_labels.is_empty() {
        return Err(Error::InvalidInput("empty reference channel list".into()));
    }
    let mut ref_idx = Vec::with_capacity(reference_labels.len());
    for label in reference_labels {
        match rec.channel_index(label) {
            Some(i) => ref_idx.push(i),
            None => {
                return Err(Error::InvalidInput(format!(
                    "unknown reference channel {label:?}; recording has {:?}",
                    rec.channels
                )))
            }
        }
    }
    let mut out = rec.data.clone();
    let inv = 1.0 / ref_idx.len() as f64;
    for r in 0..rec.n_samples() {
        let mean: f64 = ref_idx.iter().map(|&i| rec.data[[r, i]]).sum::<f64>() * inv;
        for c in 0..rec.n_channels() {
            out[[r, c]] -= mean;
        }
    }
    Ok(rec.with_data(out))
}

/// How task data is adjusted against the resting baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Subtract the baseline channel means (default).
    MeanSubtract,
    /// Subtract baseline means and divide by baseline standard deviations.
    ZScore,
}

/// Baseline correction with the default mean-subtraction rule.
pub fn baseline_correct(rec: &Recording, baseline: &Recording) -> Result<Recording> {
    baseline_correct_with(rec, baseline, BaselineMode::MeanSubtract)
}

/// Baseline correction with an explicit mode.
pub fn baseline_correct_with(
    rec: &Recording,
    baseline: &Recording,
    mode: BaselineMode,
) -> Result<Recording> {
    if rec.channels != baseline.channels {
        return Err(Error::DimensionMismatch(format!(
            "channel mismatch: task {:?} vs baseline {:?}",
            rec.channels, baseline.channels
        )));
    }
    if rec.sample_rate != baseline.sample_rate {
        return Err(Error::DimensionMismatch(format!(
            "sample rate mismatch: task {} vs baseline {}",
            rec.sample_rate, baseline.sample_rate
        )));
    }
    let nb = baseline.n_samples() as f64;
    let mut out = rec.data.clone();
    for c in 0..rec.n_channels() {
        let mean = baseline.data.column(c).sum() / nb;
        match mode {
            BaselineMode::MeanSubtract => {
                for r in 0..rec.n_samples() {
                    out[[r, c]] -= mean;
                }
            }
            BaselineMode::ZScore => {
                let var = baseline
                    .data
                    .column(c)
                    .iter()
                    .map(|v| (v - mean).powi(2))
                    .sum::<f64>()
                    / nb;
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(Error::Numerical(format!(
                        "baseline channel {:?} has zero variance; z-scoring undefined",
                        rec.channels[c]
                    )));
                }
                for r in 0..rec.n_samples() {
                    out[[r, c]] = (out[[r, c]] - mean) / sd;
                }
            }
        }
    }
    Ok(rec.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Session;
    use ndarray::array;

    fn sine_recording(freqs: &[f64], fs: f64, secs: f64) -> Recording {
        let n = (fs * secs) as usize;
        let data = Array2::from_shape_fn((n, freqs.len()), |(t, c)| {
            (2.0 * std::f64::consts::PI * freqs[c] * t as f64 / fs).sin()
        });
        let channels = (0..freqs.len()).map(|i| format!("s{i}")).collect();
        Recording::new(fs, channels, data, "test", Session::Pre).unwrap()
    }

    fn interior_rms(x: &[f64]) -> f64 {
        let n = x.len();
        let lo = n / 4;
        let hi = 3 * n / 4;
        let m = (hi - lo) as f64;
        (x[lo..hi].iter().map(|v| v * v).sum::<f64>() / m).sqrt()
    }

    #[test]
    fn bandpass_preserves_in_band_tone() {
        let rec = sine_recording(&[20.0, 20.0], 256.0, 60.0);
        let out = bandpass_filter(&rec, 0.1, 45.0).unwrap();
        let ratio = interior_rms(&out.channel(0)) / interior_rms(&rec.channel(0));
        let db = 20.0 * ratio.log10();
        assert!(db.abs() < 1.0, "in-band gain {db} dB");
    }

    #[test]
    fn bandpass_attenuates_out_of_band_tone() {
        let rec = sine_recording(&[80.0, 80.0], 256.0, 60.0);
        let out = bandpass_filter(&rec, 0.1, 45.0).unwrap();
        let ratio = interior_rms(&out.channel(0)) / interior_rms(&rec.channel(0));
        let db = 20.0 * ratio.log10();
        assert!(db <= -20.0, "out-of-band gain {db} dB");
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let rec = Recording::new(
            256.0,
            vec!["a".into(), "b".into()],
            Array2::zeros((4096, 2)),
            "z",
            Session::Pre,
        )
        .unwrap();
        let out = notch_filter(&rec, 50.0).unwrap();
        assert!(out.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn notch_kills_center_and_keeps_neighbors() {
        let rec = sine_recording(&[50.0, 20.0], 256.0, 30.0);
        let out = notch_filter(&rec, 50.0).unwrap();
        let r50 = interior_rms(&out.channel(0)) / interior_rms(&rec.channel(0));
        assert!(r50 <= 0.032, "50 Hz residual {r50}");
        let r20 = interior_rms(&out.channel(1)) / interior_rms(&rec.channel(1));
        assert!((20.0 * r20.log10()).abs() < 1.0, "20 Hz gain {} dB", 20.0 * r20.log10());
    }

    #[test]
    fn filters_are_zero_phase() {
        let rec = sine_recording(&[20.0, 20.0], 256.0, 60.0);
        let out = bandpass_filter(&rec, 0.1, 45.0).unwrap();
        let x = rec.channel(0);
        let y = out.channel(0);
        let n = x.len();
        let lo = n / 4;
        let hi = 3 * n / 4;
        let mut best_lag = i64::MIN;
        let mut best = f64::MIN;
        for lag in -5i64..=5 {
            let mut acc = 0.0;
            for t in lo..hi {
                let s = t as i64 + lag;
                acc += x[t] * y[s as usize];
            }
            if acc > best {
                best = acc;
                best_lag = lag;
            }
        }
        assert_eq!(best_lag, 0);
    }

    #[test]
    fn filtering_is_linear() {
        let fs = 256.0;
        let n = 4096;
        let mk = |f: f64| {
            Array2::from_shape_fn((n, 2), |(t, c)| {
                ((2.0 * std::f64::consts::PI * f * (t + c) as f64 / fs).sin()) + (t as f64 * 1e-4)
            })
        };
        let xa = mk(7.0);
        let xb = mk(17.0);
        let (alpha, beta) = (2.5, -0.75);
        let combo = alpha * &xa + beta * &xb;
        let rec = |d: Array2<f64>| {
            Recording::new(fs, vec!["a".into(), "b".into()], d, "l", Session::Pre).unwrap()
        };
        let fa = notch_filter(&rec(xa), 50.0).unwrap();
        let fb = notch_filter(&rec(xb), 50.0).unwrap();
        let fc = notch_filter(&rec(combo), 50.0).unwrap();
        let expect = alpha * &fa.data + beta * &fb.data;
        let num = (&fc.data - &expect).mapv(f64::abs).sum();
        let den = expect.mapv(f64::abs).sum().max(1e-30);
        assert!(num / den < 1e-9, "relative deviation {}", num / den);
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        let rec = sine_recording(&[10.0, 10.0], 256.0, 10.0);
        assert!(bandpass_filter(&rec, 0.1, 128.0).is_err());
        assert!(notch_filter(&rec, 128.0).is_err());
    }

    #[test]
    fn short_recording_rejected_for_slow_filter() {
        let rec = sine_recording(&[10.0, 10.0], 256.0, 2.0);
        assert!(bandpass_filter(&rec, 0.1, 45.0).is_err());
    }

    #[test]
    fn rereference_zero_refs_is_identity() {
        let data = array![[1.0, 2.0, 0.0], [3.0, 4.0, 0.0], [5.0, 6.0, 0.0]];
        let rec = Recording::new(
            100.0,
            vec!["a".into(), "b".into(), "r".into()],
            data.clone(),
            "t",
            Session::Pre,
        )
        .unwrap();
        let out = rereference_average(&rec, &["r".into()]).unwrap();
        assert_eq!(out.data, data);
    }

    #[test]
    fn rereference_single_reference_algebra() {
        let rec = Recording::new(
            100.0,
            vec!["a".into(), "b".into()],
            array![[1.0, 0.5], [2.0, 1.0], [3.0, -1.0]],
            "t",
            Session::Pre,
        )
        .unwrap();
        let out = rereference_average(&rec, &["b".into()]).unwrap();
        for r in 0..3 {
            assert!((out.data[[r, 0]] - (rec.data[[r, 0]] - rec.data[[r, 1]])).abs() < 1e-15);
            assert_eq!(out.data[[r, 1]], 0.0);
        }
    }

    #[test]
    fn rereference_reference_mean_becomes_zero() {
        let mut rng = crate::rng::seeded_rng(9);
        use rand::Rng;
        let data = Array2::from_shape_fn((64, 4), |_| rng.gen_range(-1.0..1.0));
        let rec = Recording::new(
            100.0,
            vec!["c1".into(), "c2".into(), "c3".into(), "c4".into()],
            data,
            "t",
            Session::Pre,
        )
        .unwrap();
        let out = rereference_average(&rec, &["c3".into(), "c4".into()]).unwrap();
        for r in 0..64 {
            let m = (out.data[[r, 2]] + out.data[[r, 3]]) / 2.0;
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn rereference_unknown_label_errors() {
        let rec = sine_recording(&[10.0, 12.0], 100.0, 1.0);
        assert!(rereference_average(&rec, &["nope".into()]).is_err());
    }

    #[test]
    fn baseline_mean_zero_is_identity() {
        let task = sine_recording(&[10.0, 12.0], 100.0, 1.0);
        let mut bdata = Array2::<f64>::zeros((50, 2));
        bdata[[0, 0]] = 1.0;
        bdata[[1, 0]] = -1.0;
        bdata[[0, 1]] = 2.0;
        bdata[[1, 1]] = -2.0;
        let baseline = Recording::new(
            100.0,
            task.channels.clone(),
            bdata,
            "b",
            Session::Pre,
        )
        .unwrap();
        let out = baseline_correct(&task, &baseline).unwrap();
        for (a, b) in task.data.iter().zip(out.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_constant_shifts_channel() {
        let task = sine_recording(&[10.0, 12.0], 100.0, 1.0);
        let bdata = Array2::from_shape_fn((40, 2), |(_, c)| if c == 0 { 5.0 } else { 0.0 });
        let baseline =
            Recording::new(100.0, task.channels.clone(), bdata, "b", Session::Pre).unwrap();
        let out = baseline_correct(&task, &baseline).unwrap();
        for r in 0..task.n_samples() {
            assert!((out.data[[r, 0]] - (task.data[[r, 0]] - 5.0)).abs() < 1e-12);
            assert!((out.data[[r, 1]] - task.data[[r, 1]]).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_means_subtract_exactly() {
        let mut rng = crate::rng::seeded_rng(21);
        use rand::Rng;
        let task_data = Array2::from_shape_fn((80, 2), |_| rng.gen_range(-2.0..2.0));
        let base_data = Array2::from_shape_fn((64, 2), |_| rng.gen_range(-2.0..2.0));
        let ch = vec!["x".into(), "y".into()];
        let task = Recording::new(100.0, ch.clone(), task_data, "t", Session::Pre).unwrap();
        let baseline = Recording::new(100.0, ch, base_data, "b", Session::Pre).unwrap();
        let out = baseline_correct(&task, &baseline).unwrap();
        for c in 0..2 {
            let tmean = task.data.column(c).sum() / 80.0;
            let bmean = baseline.data.column(c).sum() / 64.0;
            let omean = out.data.column(c).sum() / 80.0;
            assert!((omean - (tmean - bmean)).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_channel_mismatch_errors() {
        let task = sine_recording(&[10.0, 12.0], 100.0, 1.0);
        let mut baseline = task.clone();
        baseline.channels = vec!["other".into(), "s1".into()];
        assert!(baseline_correct(&task, &baseline).is_err());
    }
}
