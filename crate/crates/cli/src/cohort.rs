//! Synthetic cohort construction: three classes of subjects whose pre -> post
//! change strengthens a class-specific set of directed couplings, plus
//! behavioral scores landing inside each class's accuracy-change bin.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use eegfc_core::error::{Error, Result};
use eegfc_core::features::scoring::{bin_label, percentage_accuracy, ClassBinning};
use eegfc_core::features::ClassLabel;
use eegfc_core::recording::{Recording, Session};
use eegfc_core::rng::{derive_seed, seeded_rng};
use eegfc_core::synth::{check_var_stability, generate_var_at, VarGroundTruth};

use crate::config::SyntheticCohortSpec;

pub const TOTAL_TRIALS: u32 = 72;

/// Self-coupling of every channel at lag 1.
const SELF_COEF: f64 = 0.35;
/// Shared background couplings present in every subject.
const N_BASE_EDGES: usize = 6;
const BASE_STRENGTH: f64 = 0.2;
/// Companion spectral radius ceiling; stronger instances are rescaled.
const RADIUS_CEILING: f64 = 0.95;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassTemplate {
    pub class: ClassLabel,
    /// Directed couplings (target_channel, source_channel) strengthened post.
    pub edges: Vec<(usize, usize)>,
    pub coupling_strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SubjectEntry {
    pub id: String,
    pub class: ClassLabel,
    pub pre_correct: u32,
    pub post_correct: u32,
    pub seed: u64,
}

/// Cohort ground truth and behavioral scores. Hand-written manifests for
/// recorded (non-synthetic) cohorts only need `total_trials` and `subjects`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CohortManifest {
    pub total_trials: u32,
    /// Binning used when the cohort was synthesized (informational).
    #[serde(default)]
    pub binning: Option<ClassBinning>,
    #[serde(default)]
    pub base_edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub templates: Vec<ClassTemplate>,
    pub subjects: Vec<SubjectEntry>,
}

impl CohortManifest {
    pub fn load(path: &Path) -> Result<CohortManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: e.line(),
            col: e.column(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Accuracy change for one subject, percent.
    pub fn delta_accuracy(&self, s: &SubjectEntry) -> Result<f64> {
        Ok(percentage_accuracy(s.post_correct, self.total_trials)?
            - percentage_accuracy(s.pre_correct, self.total_trials)?)
    }
}

/// Distinct directed (target, source) pairs drawn without replacement.
fn draw_edges(
    rng: &mut impl Rng,
    n_channels: usize,
    count: usize,
    taken: &mut Vec<(usize, usize)>,
) -> Result<Vec<(usize, usize)>> {
    let capacity = n_channels * (n_channels - 1);
    if taken.len() + count > capacity {
        return Err(Error::InvalidInput(format!(
            "cannot draw {count} more edges; {} of {capacity} already taken",
            taken.len()
        )));
    }
    let mut edges = Vec::with_capacity(count);
    while edges.len() < count {
        let i = rng.gen_range(0..n_channels);
        let j = rng.gen_range(0..n_channels);
        if i == j || taken.contains(&(i, j)) {
            continue;
        }
        taken.push((i, j));
        edges.push((i, j));
    }
    Ok(edges)
}

/// The class-template plan for a cohort: shared background plus one edge set
/// per class. Deterministic in `seed`.
pub fn plan_templates(
    spec: &SyntheticCohortSpec,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<ClassTemplate>)> {
    let mut rng = seeded_rng(derive_seed(seed, &[0x7e41]));
    let mut taken = Vec::new();
    let base_edges = draw_edges(&mut rng, spec.channels, N_BASE_EDGES, &mut taken)?;
    let mut templates = Vec::with_capacity(3);
    for class in ClassLabel::ALL {
        let edges = draw_edges(&mut rng, spec.channels, spec.edges_per_class, &mut taken)?;
        templates.push(ClassTemplate {
            class,
            edges,
            coupling_strength: spec.coupling_strength,
        });
    }
    Ok((base_edges, templates))
}

/// Builds one subject's stable pre/post coefficient matrices with
/// subject-specific jitter on every coupling.
fn subject_coefficients(
    spec: &SyntheticCohortSpec,
    base_edges: &[(usize, usize)],
    template: &ClassTemplate,
    subject_seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = spec.channels;
    let mut rng = seeded_rng(derive_seed(subject_seed, &[0xc0ef]));
    let mut pre = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let jitter: f64 = rng.sample(StandardNormal);
        pre[[i, i]] = SELF_COEF * (1.0 + 0.05 * jitter);
    }
    for &(i, j) in base_edges {
        let jitter: f64 = rng.sample(StandardNormal);
        pre[[i, j]] = BASE_STRENGTH * (1.0 + 0.1 * jitter);
    }
    let mut post = pre.clone();
    for &(i, j) in &template.edges {
        let jitter: f64 = rng.sample(StandardNormal);
        post[[i, j]] += template.coupling_strength * (1.0 + 0.1 * jitter);
    }
    for m in [&mut pre, &mut post] {
        let radius = check_var_stability(std::slice::from_ref(m))?;
        if radius >= RADIUS_CEILING {
            let shrink = RADIUS_CEILING * 0.98 / radius;
            m.mapv_inplace(|v| v * shrink);
        }
    }
    Ok((pre, post))
}

/// One synthetic recording for a subject/session.
pub fn subject_recording(
    spec: &SyntheticCohortSpec,
    coefficients: Array2<f64>,
    subject_id: &str,
    session: Session,
    seed: u64,
) -> Result<Recording> {
    let gt = VarGroundTruth::new(
        vec![coefficients],
        Array2::eye(spec.channels),
        seed,
    )?;
    let n_samples = (spec.duration_secs * spec.sample_rate).round() as usize;
    let raw = generate_var_at(&gt, n_samples, 1000, spec.sample_rate)?;
    Recording::new(
        raw.sample_rate,
        raw.channels.clone(),
        raw.data,
        subject_id,
        session,
    )
}

/// Behavioral counts whose accuracy change lands inside the class's bin.
fn behavioral_counts(
    class: ClassLabel,
    binning: &ClassBinning,
    rng: &mut impl Rng,
) -> Result<(u32, u32)> {
    let edges = binning.edges();
    let (lo, hi) = match class {
        ClassLabel::Low => (edges[0], edges[1]),
        ClassLabel::Medium => (edges[1], edges[2]),
        ClassLabel::High => (edges[2], edges[3]),
    };
    let pre: u32 = rng.gen_range(18..=30);
    let target = rng.gen_range(lo..hi);
    let mut post = (pre as i64 + (target * TOTAL_TRIALS as f64 / 100.0).round() as i64)
        .clamp(0, TOTAL_TRIALS as i64) as u32;
    // half-open bins plus integer granularity: nudge until the label matches
    for _ in 0..8 {
        let delta = percentage_accuracy(post, TOTAL_TRIALS)? - percentage_accuracy(pre, TOTAL_TRIALS)?;
        let binned = bin_label(delta, binning)?;
        if binned.label == class && !binned.clamped {
            return Ok((pre, post));
        }
        let mid = (lo + hi) / 2.0;
        post = if delta < mid { post + 1 } else { post - 1 };
    }
    Err(Error::Numerical(format!(
        "could not place a {class} subject inside its accuracy bin"
    )))
}

pub struct BuiltSubject {
    pub entry: SubjectEntry,
    pub pre: Recording,
    pub post: Recording,
}

/// Manifest entry for subject `index` of `class` (cheap; no simulation).
pub fn subject_entry(
    class: ClassLabel,
    index: usize,
    seed: u64,
    binning: &ClassBinning,
) -> Result<SubjectEntry> {
    let subject_seed = derive_seed(seed, &[class.index() as u64, index as u64]);
    let mut rng = seeded_rng(derive_seed(subject_seed, &[0xbe4a]));
    let (pre_correct, post_correct) = behavioral_counts(class, binning, &mut rng)?;
    Ok(SubjectEntry {
        id: format!("s{:01}{:02}", class.index(), index),
        class,
        pre_correct,
        post_correct,
        seed: subject_seed,
    })
}

/// The pre/post recordings matching a manifest entry.
pub fn subject_recordings(
    spec: &SyntheticCohortSpec,
    base_edges: &[(usize, usize)],
    templates: &[ClassTemplate],
    entry: &SubjectEntry,
) -> Result<(Recording, Recording)> {
    let template = templates
        .iter()
        .find(|t| t.class == entry.class)
        .ok_or_else(|| Error::InvalidInput(format!("no template for class {}", entry.class)))?;
    let (pre_coef, post_coef) = subject_coefficients(spec, base_edges, template, entry.seed)?;
    let pre = subject_recording(
        spec,
        pre_coef,
        &entry.id,
        Session::Pre,
        derive_seed(entry.seed, &[0]),
    )?;
    let post = subject_recording(
        spec,
        post_coef,
        &entry.id,
        Session::Post,
        derive_seed(entry.seed, &[1]),
    )?;
    Ok((pre, post))
}

/// Deterministically builds subject `index` of `class`.
pub fn build_subject(
    spec: &SyntheticCohortSpec,
    base_edges: &[(usize, usize)],
    templates: &[ClassTemplate],
    binning: &ClassBinning,
    class: ClassLabel,
    index: usize,
    seed: u64,
) -> Result<BuiltSubject> {
    let entry = subject_entry(class, index, seed, binning)?;
    let (pre, post) = subject_recordings(spec, base_edges, templates, &entry)?;
    Ok(BuiltSubject { entry, pre, post })
}
