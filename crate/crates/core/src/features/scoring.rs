//! Behavioral performance scoring and three-level binning of accuracy change.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ClassLabel;

/// Percentage of correct responses: 100 * correct / total.
pub fn percentage_accuracy(correct: u32, total: u32) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidInput("total trial count is zero".into()));
    }
    if correct > total {
        return Err(Error::InvalidInput(format!(
            "correct count {correct} exceeds total {total}"
        )));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Mean/SD bin edges for mapping an accuracy change onto three levels:
/// low for [mu, mu+sigma), medium for [mu+sigma, mu+2*sigma),
/// high for [mu+2*sigma, mu+3*sigma].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBinning {
    pub mu: f64,
    pub sigma: f64,
}

/// The published cohort statistics these bins default to.
pub const DEFAULT_BINNING: ClassBinning = ClassBinning {
    mu: 20.76,
    sigma: 14.78,
};

impl ClassBinning {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidInput(format!(
                "binning needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(ClassBinning { mu, sigma })
    }

    /// Recomputes mu/sigma from a cohort's accuracy changes.
    pub fn from_deltas(deltas: &[f64]) -> Result<Self> {
        if deltas.len() < 2 {
            return Err(Error::InvalidInput(
                "need at least 2 values to estimate binning".into(),
            ));
        }
        let n = deltas.len() as f64;
        let mu = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1.0);
        Self::new(mu, var.sqrt())
    }

    pub fn edges(&self) -> [f64; 4] {
        [
            self.mu,
            self.mu + self.sigma,
            self.mu + 2.0 * self.sigma,
            self.mu + 3.0 * self.sigma,
        ]
    }
}

/// A binned label plus whether the input fell outside the covered range and
/// was clamped to the nearest bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinnedLabel {
    pub label: ClassLabel,
    pub clamped: bool,
}

/// Maps an accuracy change onto its bin. Bins are half-open on the left edge
/// and closed at mu+3*sigma; values outside [mu, mu+3*sigma] clamp to the
/// nearest bin with `clamped` set.
pub fn bin_label(delta_accuracy: f64, binning: &ClassBinning) -> Result<BinnedLabel> {
    if !delta_accuracy.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite accuracy change {delta_accuracy}"
        )));
    }
    let [e0, e1, e2, e3] = binning.edges();
    let (label, clamped) = if delta_accuracy < e0 {
        (ClassLabel::Low, true)
    } else if delta_accuracy < e1 {
        (ClassLabel::Low, false)
    } else if delta_accuracy < e2 {
        (ClassLabel::Medium, false)
    } else if delta_accuracy <= e3 {
        (ClassLabel::High, false)
    } else {
        (ClassLabel::High, true)
    };
    if clamped {
        log::warn!(
            "accuracy change {delta_accuracy} outside [{e0}, {e3}]; clamped to {label}",
        );
    }
    Ok(BinnedLabel { label, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentage_accuracy_values() {
        assert_eq!(percentage_accuracy(72, 72).unwrap(), 100.0);
        assert_eq!(percentage_accuracy(36, 72).unwrap(), 50.0);
        assert_eq!(percentage_accuracy(0, 72).unwrap(), 0.0);
        assert!(percentage_accuracy(1, 0).is_err());
        assert!(percentage_accuracy(73, 72).is_err());
    }

    #[test]
    fn published_bin_ranges() {
        let b = DEFAULT_BINNING;
        assert_eq!(bin_label(25.0, &b).unwrap().label, ClassLabel::Low);
        assert_eq!(bin_label(40.0, &b).unwrap().label, ClassLabel::Medium);
        assert_eq!(bin_label(60.0, &b).unwrap().label, ClassLabel::High);
    }

    #[test]
    fn boundaries_are_half_open() {
        let b = DEFAULT_BINNING;
        // 35.54 is exactly mu + sigma
        let at_edge = bin_label(b.mu + b.sigma, &b).unwrap();
        assert_eq!(at_edge.label, ClassLabel::Medium);
        assert!(!at_edge.clamped);
        let top = bin_label(b.mu + 3.0 * b.sigma, &b).unwrap();
        assert_eq!(top.label, ClassLabel::High);
        assert!(!top.clamped);
    }

    #[test]
    fn out_of_range_clamps_with_flag() {
        let b = DEFAULT_BINNING;
        let below = bin_label(5.0, &b).unwrap();
        assert_eq!(below.label, ClassLabel::Low);
        assert!(below.clamped);
        let above = bin_label(99.0, &b).unwrap();
        assert_eq!(above.label, ClassLabel::High);
        assert!(above.clamped);
    }

    #[test]
    fn binning_is_monotone() {
        let b = DEFAULT_BINNING;
        let mut prev = ClassLabel::Low;
        let mut d = -10.0;
        while d <= 90.0 {
            let l = bin_label(d, &b).unwrap().label;
            assert!(l >= prev, "label decreased at {d}");
            prev = l;
            d += 0.37;
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(bin_label(f64::NAN, &DEFAULT_BINNING).is_err());
    }

    #[test]
    fn recomputed_binning_matches_moments() {
        let deltas = [10.0, 20.0, 30.0, 40.0];
        let b = ClassBinning::from_deltas(&deltas).unwrap();
        assert!((b.mu - 25.0).abs() < 1e-12);
        assert!((b.sigma - (500.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn invalid_binning_rejected() {
        assert!(ClassBinning::new(10.0, 0.0).is_err());
        assert!(ClassBinning::new(f64::NAN, 1.0).is_err());
    }
}
