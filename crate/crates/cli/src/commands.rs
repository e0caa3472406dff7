//! The pipeline subcommands. Each is rerunnable: outputs are derived purely
//! from (config, seed), up-to-date files are skipped, and rerunning changes
//! no bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use eegfc_core::connectivity::msc::msc_matrix_labeled;
use eegfc_core::connectivity::mvar::{fit_mvar, pdc_matrix, select_order};
use eegfc_core::connectivity::wc::{wc_matrix, SmoothingSpec};
use eegfc_core::connectivity::{
    load_matrix, save_matrix, ConnectivityMatrix, MatrixProvenance, Metric,
};
use eegfc_core::error::Error;
use eegfc_core::features::scoring::{bin_label, ClassBinning};
use eegfc_core::features::selection::{ScorerSpec, SelectorKind, SelectorSpec};
use eegfc_core::features::{save_dataset, ClassLabel};
use eegfc_core::ml::grid::{coarse_grid, full_grid, CvReport, HyperparameterGrid};
use eegfc_core::ml::pipeline::{build_delta_dataset, evaluate_on_dataset, PipelineSpec, SubjectMatrices};
use eegfc_core::ml::{default_params, ModelFamily};
use eegfc_core::preprocess::{
    bandpass_filter, baseline_correct_with, notch_filter, rereference_average, BaselineMode,
};
use eegfc_core::recording::{load_recording, save_recording, Recording, Session};
use eegfc_core::rng::derive_seed;

use crate::cohort::{plan_templates, subject_entry, subject_recordings, CohortManifest, TOTAL_TRIALS};
use crate::config::{
    BaselineModeConfig, CohortSource, FfsScorerConfig, GridMode, OrderConfig, RunConfig,
};
use crate::table;

pub type CliResult<T> = anyhow::Result<T>;

/// Where the pipeline stages read and write for one run.
pub struct RunPaths {
    pub run_dir: PathBuf,
}

impl RunPaths {
    pub fn new(cfg: &RunConfig) -> RunPaths {
        RunPaths {
            run_dir: cfg.run_dir(),
        }
    }

    pub fn cohort_dir(&self, session: Session) -> PathBuf {
        self.run_dir.join("cohort").join(session.as_str())
    }

    pub fn manifest(&self) -> PathBuf {
        self.run_dir.join("cohort").join("manifest.json")
    }

    pub fn preprocessed_dir(&self, session: Session) -> PathBuf {
        self.run_dir.join("preprocessed").join(session.as_str())
    }

    pub fn matrix_path(&self, metric: Metric, subject: &str, session: Session) -> PathBuf {
        self.run_dir
            .join("matrices")
            .join(metric.as_str())
            .join(format!("{subject}_{session}.csv"))
    }

    pub fn dataset_path(&self, metric: Metric) -> PathBuf {
        self.run_dir.join("datasets").join(format!("{metric}.csv"))
    }

    pub fn report_json(&self) -> PathBuf {
        self.run_dir.join("report.json")
    }

    pub fn table_md(&self) -> PathBuf {
        self.run_dir.join("table.md")
    }
}

/// Resolves the manifest path and recording directories for this run.
fn cohort_inputs(cfg: &RunConfig, paths: &RunPaths) -> (PathBuf, PathBuf, PathBuf) {
    match &cfg.cohort {
        CohortSource::Synthetic(_) => (
            paths.manifest(),
            paths.cohort_dir(Session::Pre),
            paths.cohort_dir(Session::Post),
        ),
        CohortSource::Recordings(src) => (
            src.manifest.clone(),
            src.pre_dir.clone(),
            src.post_dir.clone(),
        ),
    }
}

/// `validate`: config invariants, data presence and work-unit estimates.
/// Returns the list of violations (empty = runnable).
pub fn cmd_validate(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let issues = cfg.validate();
    for issue in &issues {
        eprintln!("invalid: {issue}");
    }
    let mut grid_points = 0usize;
    for family in &cfg.families {
        let grid = grid_for(cfg, *family);
        let card = grid.cardinality();
        grid_points += card;
        if card > 10_000 {
            eprintln!(
                "warning: {family} grid holds {card} points; an exhaustive search at this \
                 density is impractical (use coarse mode unless you mean it)"
            );
        }
    }
    let n_subjects = match &cfg.cohort {
        CohortSource::Synthetic(s) => 3 * s.subjects_per_class,
        CohortSource::Recordings(src) => CohortManifest::load(&src.manifest)
            .map(|m| m.subjects.len())
            .unwrap_or(0),
    };
    let cells = cfg.metrics.len() * cfg.selectors.len() * cfg.families.len();
    let folds = cfg.cv.folds * cfg.cv.repeats;
    eprintln!(
        "plan: {n_subjects} subjects, {} metric(s) x {} selector(s) x {} familie(s) = {cells} cells, \
         {folds} folds each, {grid_points} grid points total",
        cfg.metrics.len(),
        cfg.selectors.len(),
        cfg.families.len()
    );
    Ok(issues)
}

/// `synth`: writes the synthetic cohort (recordings plus ground-truth
/// manifest). Existing files are left untouched; regeneration is bit-exact.
pub fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    let spec = match &cfg.cohort {
        CohortSource::Synthetic(s) => s.clone(),
        CohortSource::Recordings(_) => {
            anyhow::bail!("synth requires a synthetic cohort spec in the config")
        }
    };
    let paths = RunPaths::new(cfg);
    let (base_edges, templates) = plan_templates(&spec, cfg.seed)?;
    let binning = cfg
        .binning()
        .unwrap_or(eegfc_core::features::scoring::DEFAULT_BINNING);

    let mut entries = Vec::new();
    for class in ClassLabel::ALL {
        for idx in 0..spec.subjects_per_class {
            entries.push(subject_entry(class, idx, cfg.seed, &binning)?);
        }
    }

    let results: Vec<CliResult<()>> = entries
        .par_iter()
        .map(|entry| {
            let pre_path = paths.cohort_dir(Session::Pre).join(format!("{}.csv", entry.id));
            let post_path = paths
                .cohort_dir(Session::Post)
                .join(format!("{}.csv", entry.id));
            if pre_path.exists() && post_path.exists() {
                return Ok(());
            }
            let (pre, post) = subject_recordings(&spec, &base_edges, &templates, entry)?;
            save_recording(&pre, &pre_path)?;
            save_recording(&post, &post_path)?;
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    let manifest = CohortManifest {
        total_trials: TOTAL_TRIALS,
        binning: Some(binning),
        base_edges,
        templates,
        subjects: entries,
    };
    manifest.save(&paths.manifest())?;
    eprintln!(
        "synth: {} subjects under {}",
        manifest.subjects.len(),
        paths.run_dir.display()
    );
    Ok(())
}

fn preprocess_one(cfg: &RunConfig, rec: &Recording, baseline: Option<&Recording>) -> CliResult<Recording> {
    let mut out = rec.clone();
    if let Some((low, high)) = cfg.preprocess.bandpass {
        out = bandpass_filter(&out, low, high)?;
    }
    if let Some(center) = cfg.preprocess.notch {
        out = notch_filter(&out, center)?;
    }
    if let Some(refs) = &cfg.preprocess.rereference {
        out = rereference_average(&out, refs)?;
    }
    if let Some(mode) = cfg.preprocess.baseline {
        let baseline = baseline.ok_or_else(|| {
            anyhow::anyhow!("baseline correction requested but no baseline recording available")
        })?;
        let mode = match mode {
            BaselineModeConfig::Mean => BaselineMode::MeanSubtract,
            BaselineModeConfig::Zscore => BaselineMode::ZScore,
        };
        out = baseline_correct_with(&out, baseline, mode)?;
    }
    Ok(out)
}

/// `preprocess`: applies the enabled chain to every cohort recording.
pub fn cmd_preprocess(cfg: &RunConfig) -> CliResult<()> {
    if !cfg.preprocess.any_enabled() {
        eprintln!("preprocess: nothing enabled in the config; skipping");
        return Ok(());
    }
    let paths = RunPaths::new(cfg);
    let (manifest_path, pre_dir, post_dir) = cohort_inputs(cfg, &paths);
    let manifest = CohortManifest::load(&manifest_path)?;
    let baseline_dir = match &cfg.cohort {
        CohortSource::Recordings(src) => src.baseline_dir.clone(),
        CohortSource::Synthetic(_) => None,
    };
    let jobs: Vec<(Session, PathBuf)> = manifest
        .subjects
        .iter()
        .flat_map(|s| {
            [
                (Session::Pre, pre_dir.join(format!("{}.csv", s.id))),
                (Session::Post, post_dir.join(format!("{}.csv", s.id))),
            ]
        })
        .collect();
    let results: Vec<CliResult<()>> = jobs
        .par_iter()
        .map(|(session, input)| {
            let out_path = paths
                .preprocessed_dir(*session)
                .join(input.file_name().unwrap());
            if out_path.exists() {
                return Ok(());
            }
            let rec = load_recording(input)?;
            let baseline = match &baseline_dir {
                Some(dir) => Some(load_recording(
                    &dir.join(input.file_name().unwrap()),
                )?),
                None => None,
            };
            let processed = preprocess_one(cfg, &rec, baseline.as_ref())?;
            save_recording(&processed, &out_path)?;
            Ok(())
        })
        .collect();
    let failures: Vec<String> = results
        .into_iter()
        .zip(&jobs)
        .filter_map(|(r, (session, p))| {
            r.err().map(|e| format!("{} {}: {e}", session, p.display()))
        })
        .collect();
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("preprocess failure: {f}");
        }
        anyhow::bail!("{} preprocessing failure(s)", failures.len());
    }
    eprintln!("preprocess: {} recordings done", jobs.len());
    Ok(())
}

fn compute_matrix(cfg: &RunConfig, rec: &Recording, metric: Metric) -> CliResult<ConnectivityMatrix> {
    let m = match metric {
        Metric::Msc => {
            let window = (cfg.welch.window_secs * rec.sample_rate).round() as usize;
            let csd = eegfc_core::spectral::welch::welch_csd(rec, window, cfg.welch.overlap)?;
            msc_matrix_labeled(&csd, cfg.band, &rec.channels)?
        }
        Metric::Wc => wc_matrix(
            rec,
            cfg.band,
            cfg.wc.omega0,
            &SmoothingSpec {
                cycles: cfg.wc.smoothing_cycles,
            },
        )?,
        Metric::Pdc => {
            let order = match cfg.mvar_order {
                OrderConfig::Fixed { order } => order,
                OrderConfig::Auto { p_max } => select_order(rec, p_max)?,
            };
            let model = fit_mvar(rec, order)?;
            pdc_matrix(&model, cfg.band, rec.sample_rate)?
        }
    };
    Ok(m)
}

#[derive(Debug)]
pub struct TaskFailure {
    pub subject: String,
    pub session: Session,
    pub metric: Metric,
    pub message: String,
}

/// `connectivity`: one matrix file per (subject, session, metric). Existing
/// outputs are skipped; per-subject failures are isolated and listed.
pub fn cmd_connectivity(cfg: &RunConfig) -> CliResult<Vec<TaskFailure>> {
    let paths = RunPaths::new(cfg);
    let (manifest_path, raw_pre, raw_post) = cohort_inputs(cfg, &paths);
    let manifest = CohortManifest::load(&manifest_path)?;
    let (pre_dir, post_dir) = if cfg.preprocess.any_enabled() {
        let p = paths.preprocessed_dir(Session::Pre);
        if !p.exists() {
            anyhow::bail!(
                "preprocessing is enabled but {} is missing; run `preprocess` first",
                p.display()
            );
        }
        (
            paths.preprocessed_dir(Session::Pre),
            paths.preprocessed_dir(Session::Post),
        )
    } else {
        (raw_pre, raw_post)
    };

    let recordings: Vec<(String, Session, PathBuf)> = manifest
        .subjects
        .iter()
        .flat_map(|s| {
            [
                (s.id.clone(), Session::Pre, pre_dir.join(format!("{}.csv", s.id))),
                (s.id.clone(), Session::Post, post_dir.join(format!("{}.csv", s.id))),
            ]
        })
        .collect();

    let failures: Vec<TaskFailure> = recordings
        .par_iter()
        .flat_map(|(subject, session, path)| {
            let mut fails = Vec::new();
            let todo: Vec<Metric> = cfg
                .metrics
                .iter()
                .copied()
                .filter(|m| !paths.matrix_path(*m, subject, *session).exists())
                .collect();
            if todo.is_empty() {
                return fails;
            }
            let rec = match load_recording(path) {
                Ok(r) => r,
                Err(e) => {
                    for m in todo {
                        fails.push(TaskFailure {
                            subject: subject.clone(),
                            session: *session,
                            metric: m,
                            message: e.to_string(),
                        });
                    }
                    return fails;
                }
            };
            for metric in todo {
                match compute_matrix(cfg, &rec, metric) {
                    Ok(matrix) => {
                        let prov = MatrixProvenance {
                            subject_id: subject.clone(),
                            session: *session,
                        };
                        let out = paths.matrix_path(metric, subject, *session);
                        if let Err(e) = save_matrix(&matrix, &prov, &out) {
                            fails.push(TaskFailure {
                                subject: subject.clone(),
                                session: *session,
                                metric,
                                message: e.to_string(),
                            });
                        }
                    }
                    Err(e) => fails.push(TaskFailure {
                        subject: subject.clone(),
                        session: *session,
                        metric,
                        message: e.to_string(),
                    }),
                }
            }
            fails
        })
        .collect();

    for f in &failures {
        eprintln!(
            "connectivity failure: subject {} {} {}: {}",
            f.subject, f.session, f.metric, f.message
        );
    }
    let done = recordings.len() * cfg.metrics.len() - failures.len();
    eprintln!("connectivity: {done} matrices ready under {}", paths.run_dir.display());
    Ok(failures)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellReport {
    pub metric: Metric,
    pub selector: SelectorKind,
    pub family: ModelFamily,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<CvReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub run_id: String,
    pub seed: u64,
    pub band: (f64, f64),
    pub cv: eegfc_core::ml::cv::CvSpec,
    pub binning: ClassBinning,
    pub top_k: usize,
    pub n_subjects: usize,
    pub cells: Vec<CellReport>,
}

pub fn grid_for(cfg: &RunConfig, family: ModelFamily) -> HyperparameterGrid {
    match cfg.grid_mode {
        GridMode::Coarse => coarse_grid(family),
        GridMode::Full => full_grid(family),
    }
}

fn selector_for(cfg: &RunConfig, kind: SelectorKind, family: ModelFamily) -> SelectorSpec {
    let mut spec = SelectorSpec::new(kind, cfg.top_k);
    if kind == SelectorKind::Ffs {
        spec.scorer = match cfg.ffs_scorer {
            FfsScorerConfig::Linear => ScorerSpec::default(),
            FfsScorerConfig::TargetFamily => ScorerSpec::Model {
                family,
                params: default_params(family),
            },
        };
    }
    spec
}

/// Labels every subject by binning its accuracy change.
pub fn label_subjects(
    manifest: &CohortManifest,
    binning_cfg: Option<ClassBinning>,
) -> CliResult<(ClassBinning, Vec<(String, ClassLabel)>)> {
    let deltas: Vec<f64> = manifest
        .subjects
        .iter()
        .map(|s| manifest.delta_accuracy(s))
        .collect::<Result<_, Error>>()?;
    let binning = match binning_cfg {
        Some(b) => b,
        None => ClassBinning::from_deltas(&deltas)?,
    };
    let mut labeled = Vec::with_capacity(manifest.subjects.len());
    for (s, delta) in manifest.subjects.iter().zip(&deltas) {
        let binned = bin_label(*delta, &binning)?;
        if binned.clamped {
            eprintln!(
                "warning: subject {} accuracy change {delta:.2} falls outside the bins; clamped to {}",
                s.id, binned.label
            );
        }
        labeled.push((s.id.clone(), binned.label));
    }
    Ok((binning, labeled))
}

/// Loads one metric's pre/post matrices for every labeled subject.
fn load_subject_matrices(
    paths: &RunPaths,
    metric: Metric,
    labeled: &[(String, ClassLabel)],
) -> CliResult<Vec<SubjectMatrices>> {
    let mut out = Vec::with_capacity(labeled.len());
    for (id, label) in labeled {
        let (pre, _) = load_matrix(&paths.matrix_path(metric, id, Session::Pre))?;
        let (post, _) = load_matrix(&paths.matrix_path(metric, id, Session::Post))?;
        out.push(SubjectMatrices {
            subject_id: id.clone(),
            pre,
            post,
            label: *label,
        });
    }
    Ok(out)
}

/// `classify`: runs every enabled (metric, selector, family) cell and writes
/// report.json plus the rendered accuracy table. Cell failures are recorded
/// in the report and do not abort the remaining cells.
pub fn cmd_classify(cfg: &RunConfig) -> CliResult<RunReport> {
    let paths = RunPaths::new(cfg);
    let (manifest_path, _, _) = cohort_inputs(cfg, &paths);
    let manifest = CohortManifest::load(&manifest_path)?;
    let (binning, labeled) = label_subjects(&manifest, cfg.binning())?;

    let mut cells = Vec::new();
    for (mi, &metric) in cfg.metrics.iter().enumerate() {
        let subjects = load_subject_matrices(&paths, metric, &labeled)?;
        let dataset = build_delta_dataset(&subjects, cfg.delta.to_mode())?;
        save_dataset(
            &dataset,
            Some(&binning),
            Some(cfg.band),
            Some(metric),
            &paths.dataset_path(metric),
        )?;
        for (si, &selector) in cfg.selectors.iter().enumerate() {
            for (fi, &family) in cfg.families.iter().enumerate() {
                let spec = PipelineSpec {
                    delta_mode: cfg.delta.to_mode(),
                    selector: Some(selector_for(cfg, selector, family)),
                    grid: grid_for(cfg, family),
                    cv: cfg.cv,
                    };
                let seed = derive_seed(cfg.seed, &[mi as u64, si as u64, fi as u64]);
                eprintln!("classify: cell {metric} x {selector} x {family}");
                match evaluate_on_dataset(&dataset, &spec, seed) {
                    Ok(report) => cells.push(CellReport {
                        metric,
                        selector,
                        family,
                        status: "ok".into(),
                        error: None,
                        report: Some(report),
                    }),
                    Err(e) => {
                        eprintln!("classify failure: {metric} x {selector} x {family}: {e}");
                        cells.push(CellReport {
                            metric,
                            selector,
                            family,
                            status: "failed".into(),
                            error: Some(e.to_string()),
                            report: None,
                        });
                    }
                }
            }
        }
    }

    let report = RunReport {
        run_id: cfg.run_id(),
        seed: cfg.seed,
        band: cfg.band,
        cv: cfg.cv,
        binning,
        top_k: cfg.top_k,
        n_subjects: labeled.len(),
        cells,
    };
    fs::create_dir_all(&paths.run_dir)?;
    let json = serde_json::to_vec_pretty(&report)?;
    fs::write(paths.report_json(), &json)?;
    fs::write(paths.table_md(), table::render(&report))?;
    eprintln!(
        "classify: report at {} ({} cells)",
        paths.report_json().display(),
        report.cells.len()
    );
    Ok(report)
}

/// `report`: re-renders table.md from an existing report.json.
pub fn cmd_report(cfg: &RunConfig) -> CliResult<()> {
    let paths = RunPaths::new(cfg);
    let json = fs::read_to_string(paths.report_json())?;
    let report: RunReport = serde_json::from_str(&json)?;
    fs::write(paths.table_md(), table::render(&report))?;
    eprintln!("report: table at {}", paths.table_md().display());
    Ok(())
}

/// Convenience used by tests and the acceptance suite: loads the labeled
/// pre/post matrices of one metric.
pub fn load_cell_inputs(
    cfg: &RunConfig,
    metric: Metric,
) -> CliResult<Vec<SubjectMatrices>> {
    let paths = RunPaths::new(cfg);
    let (manifest_path, _, _) = cohort_inputs(cfg, &paths);
    let manifest = CohortManifest::load(&manifest_path)?;
    let (_, labeled) = label_subjects(&manifest, cfg.binning())?;
    load_subject_matrices(&paths, metric, &labeled)
}

/// Maps an outcome to the documented exit code: 0 ok, 1 invalid config,
/// 2 runtime failure with partial results.
pub fn exit_code_for_failures(n_failures: usize) -> i32 {
    if n_failures == 0 {
        0
    } else {
        2
    }
}
