//! Declarative run configuration: one JSON document drives every subcommand.
//! Precedence is flag > config field > built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use eegfc_core::connectivity::Metric;
use eegfc_core::features::selection::SelectorKind;
use eegfc_core::ml::cv::CvSpec;
use eegfc_core::ml::ModelFamily;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; None uses every available core.
    #[serde(default)]
    pub jobs: Option<usize>,
    pub cohort: CohortSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    #[serde(default = "default_selectors")]
    pub selectors: Vec<SelectorKind>,
    #[serde(default = "default_families")]
    pub families: Vec<ModelFamily>,
    #[serde(default)]
    pub grid_mode: GridMode,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub binning: BinningConfig,
    #[serde(default)]
    pub cv: CvSpec,
    #[serde(default)]
    pub mvar_order: OrderConfig,
    #[serde(default)]
    pub delta: DeltaConfig,
    #[serde(default)]
    pub wc: WcConfig,
    #[serde(default)]
    pub welch: WelchConfig,
    #[serde(default)]
    pub ffs_scorer: FfsScorerConfig,
}

fn default_seed() -> u64 {
    42
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::Msc, Metric::Wc, Metric::Pdc]
}
fn default_band() -> (f64, f64) {
    eegfc_core::connectivity::DEFAULT_BAND
}
fn default_selectors() -> Vec<SelectorKind> {
    vec![SelectorKind::Ffs, SelectorKind::Rfe]
}
fn default_families() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}
fn default_top_k() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum CohortSource {
    Synthetic(SyntheticCohortSpec),
    Recordings(RecordingsSource),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCohortSpec {
    #[serde(default = "default_subjects_per_class")]
    pub subjects_per_class: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_duration")]
    pub duration_secs: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    /// Directed couplings strengthened pre -> post, per class.
    #[serde(default = "default_edges_per_class")]
    pub edges_per_class: usize,
    #[serde(default = "default_coupling")]
    pub coupling_strength: f64,
}

fn default_subjects_per_class() -> usize {
    17
}
fn default_channels() -> usize {
    28
}
fn default_duration() -> f64 {
    60.0
}
fn default_rate() -> f64 {
    256.0
}
fn default_edges_per_class() -> usize {
    8
}
fn default_coupling() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecordingsSource {
    pub pre_dir: PathBuf,
    pub post_dir: PathBuf,
    pub manifest: PathBuf,
    /// Optional directory of per-subject resting baselines for correction.
    #[serde(default)]
    pub baseline_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// (low, high) cutoffs in Hz.
    #[serde(default)]
    pub bandpass: Option<(f64, f64)>,
    /// Notch center in Hz.
    #[serde(default)]
    pub notch: Option<f64>,
    /// Reference channel labels for average re-referencing.
    #[serde(default)]
    pub rereference: Option<Vec<String>>,
    /// Baseline correction mode; needs `baseline_dir` on the cohort.
    #[serde(default)]
    pub baseline: Option<BaselineModeConfig>,
}

impl PreprocessConfig {
    pub fn any_enabled(&self) -> bool {
        self.bandpass.is_some()
            || self.notch.is_some()
            || self.rereference.is_some()
            || self.baseline.is_some()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BaselineModeConfig {
    Mean,
    Zscore,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    #[default]
    Coarse,
    Full,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BinningConfig {
    /// Use fixed mean/SD bin edges.
    Fixed { mu: f64, sigma: f64 },
    /// Estimate mean/SD from the cohort's accuracy changes.
    Recompute,
}

impl Default for BinningConfig {
    fn default() -> Self {
        let b = eegfc_core::features::scoring::DEFAULT_BINNING;
        BinningConfig::Fixed {
            mu: b.mu,
            sigma: b.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OrderConfig {
    /// Minimize AIC over 1..=p_max.
    Auto { p_max: usize },
    Fixed { order: usize },
}

impl Default for OrderConfig {
    fn default() -> Self {
        OrderConfig::Auto { p_max: 6 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConfig {
    #[default]
    Absolute,
    Signed,
}

impl DeltaConfig {
    pub fn to_mode(self) -> eegfc_core::features::delta::DeltaMode {
        match self {
            DeltaConfig::Absolute => eegfc_core::features::delta::DeltaMode::Absolute,
            DeltaConfig::Signed => eegfc_core::features::delta::DeltaMode::Signed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WcConfig {
    pub omega0: f64,
    pub smoothing_cycles: f64,
}

impl Default for WcConfig {
    fn default() -> Self {
        WcConfig {
            omega0: eegfc_core::spectral::cwt::DEFAULT_OMEGA0,
            smoothing_cycles: eegfc_core::connectivity::wc::SmoothingSpec::default().cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WelchConfig {
    pub window_secs: f64,
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            window_secs: 2.0,
            overlap: eegfc_core::spectral::welch::DEFAULT_OVERLAP,
        }
    }
}

/// Forward selection re-scores candidate subsets thousands of times per fold,
/// so the default scorer is the closed-form linear ranker; scoring with the
/// cell's own family is available but slow for anything beyond trees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum FfsScorerConfig {
    #[default]
    Linear,
    TargetFamily,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("malformed config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// Content hash over every result-affecting field (output location and
    /// worker count excluded), so distinct configurations never collide.
    pub fn run_id(&self) -> String {
        let mut sanitized = self.clone();
        sanitized.out_dir = PathBuf::new();
        sanitized.jobs = None;
        let canonical = serde_json::to_vec(&sanitized).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.run_id())
    }

    pub fn binning(&self) -> Option<eegfc_core::features::scoring::ClassBinning> {
        match self.binning {
            BinningConfig::Fixed { mu, sigma } => {
                Some(eegfc_core::features::scoring::ClassBinning { mu, sigma })
            }
            BinningConfig::Recompute => None,
        }
    }

    /// Structural validation; returns one message per violation, each with a
    /// field pointer.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.metrics.is_empty() {
            issues.push("metrics: at least one metric must be enabled".into());
        }
        if self.selectors.is_empty() {
            issues.push("selectors: at least one selector must be enabled".into());
        }
        if self.families.is_empty() {
            issues.push("families: at least one classifier family must be enabled".into());
        }
        if !(self.band.0 < self.band.1) || self.band.0 < 0.0 {
            issues.push(format!(
                "band: ({}, {}) is not an ascending non-negative range",
                self.band.0, self.band.1
            ));
        }
        if self.top_k == 0 {
            issues.push("top_k: must be at least 1".into());
        }
        if self.cv.folds < 2 || self.cv.repeats == 0 {
            issues.push("cv: need folds >= 2 and repeats >= 1".into());
        }
        match &self.cohort {
            CohortSource::Synthetic(spec) => {
                if spec.subjects_per_class < 2 {
                    issues.push("cohort.synthetic.subjects_per_class: need at least 2".into());
                }
                if spec.channels < 2 {
                    issues.push("cohort.synthetic.channels: need at least 2".into());
                }
                if !(spec.sample_rate > 0.0) || !(spec.duration_secs > 0.0) {
                    issues.push("cohort.synthetic: sample_rate and duration_secs must be positive".into());
                }
                if self.band.1 >= spec.sample_rate / 2.0 {
                    issues.push(format!(
                        "band: upper edge {} reaches the Nyquist frequency {}",
                        self.band.1,
                        spec.sample_rate / 2.0
                    ));
                }
                let n = spec.channels;
                let available = n * (n - 1);
                if 3 * spec.edges_per_class + 6 > available {
                    issues.push(format!(
                        "cohort.synthetic.edges_per_class: {} classes x {} edges exceed the {} available off-diagonal couplings",
                        3, spec.edges_per_class, available
                    ));
                }
            }
            CohortSource::Recordings(src) => {
                for (field, p) in [
                    ("cohort.recordings.pre_dir", &src.pre_dir),
                    ("cohort.recordings.post_dir", &src.post_dir),
                    ("cohort.recordings.manifest", &src.manifest),
                ] {
                    if !p.exists() {
                        issues.push(format!("{field}: path {} does not exist", p.display()));
                    }
                }
                if let Some(b) = &src.baseline_dir {
                    if !b.exists() {
                        issues.push(format!(
                            "cohort.recordings.baseline_dir: path {} does not exist",
                            b.display()
                        ));
                    }
                }
            }
        }
        if let BinningConfig::Fixed { sigma, .. } = self.binning {
            if !(sigma > 0.0) {
                issues.push("binning.sigma: must be positive".into());
            }
        }
        if let OrderConfig::Fixed { order } = self.mvar_order {
            if order == 0 {
                issues.push("mvar_order.order: must be at least 1".into());
            }
        }
        if let OrderConfig::Auto { p_max } = self.mvar_order {
            if p_max == 0 {
                issues.push("mvar_order.p_max: must be at least 1".into());
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config() -> RunConfig {
        serde_json::from_str(
            r#"{
                "cohort": {"synthetic": {"subjects_per_class": 3, "channels": 6,
                           "duration_secs": 4.0, "sample_rate": 128.0}},
                "metrics": ["pdc"],
                "selectors": ["rfe"],
                "families": ["svm"]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = synth_config();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.band, (13.0, 29.0));
        assert_eq!(cfg.cv.folds, 10);
        assert_eq!(cfg.top_k, 100);
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn run_id_ignores_output_location_but_not_seed() {
        let a = synth_config();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.run_id(), b.run_id());
        let mut c = a.clone();
        c.seed = 43;
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn validation_reports_field_pointers() {
        let mut cfg = synth_config();
        cfg.metrics.clear();
        cfg.band = (29.0, 13.0);
        let issues = cfg.validate();
        assert!(issues.iter().any(|i| i.starts_with("metrics:")));
        assert!(issues.iter().any(|i| i.starts_with("band:")));
    }

    #[test]
    fn missing_paths_detected() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "cohort": {"recordings": {"pre_dir": "/no/such/dir",
                           "post_dir": "/no/such/dir2", "manifest": "/no/file.json"}}
            }"#,
        )
        .unwrap();
        let issues = cfg.validate();
        assert_eq!(
            issues
                .iter()
                .filter(|i| i.contains("does not exist"))
                .count(),
            3
        );
    }
}
