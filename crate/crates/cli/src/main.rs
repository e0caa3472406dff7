use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eegfc_cli::commands::{self, exit_code_for_failures};
use eegfc_cli::config::RunConfig;

/// Functional-connectivity batch pipeline: synthesize or load recordings,
/// preprocess, compute connectivity matrices, and classify pre/post
/// performance change.
#[derive(Parser)]
#[command(name = "eegfc", version, about)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, default_value = "run.json")]
    config: PathBuf,

    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and report estimated work.
    Validate,
    /// Write the synthetic cohort (recordings + ground-truth manifest).
    Synth,
    /// Filter / re-reference / baseline-correct the cohort recordings.
    Preprocess,
    /// Compute one connectivity matrix per (subject, session, metric).
    Connectivity,
    /// Run the metric x selector x family crossing and write the report.
    Classify,
    /// Re-render table.md from an existing report.json.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }

    // structural validation guards every subcommand
    let issues = cfg.validate();
    if !issues.is_empty() {
        for issue in &issues {
            eprintln!("invalid: {issue}");
        }
        return ExitCode::from(1);
    }

    let outcome: anyhow::Result<i32> = match cli.command {
        Command::Validate => commands::cmd_validate(&cfg).map(|issues| {
            if issues.is_empty() {
                0
            } else {
                1
            }
        }),
        Command::Synth => commands::cmd_synth(&cfg).map(|_| 0),
        Command::Preprocess => commands::cmd_preprocess(&cfg).map(|_| 0),
        Command::Connectivity => {
            commands::cmd_connectivity(&cfg).map(|fails| exit_code_for_failures(fails.len()))
        }
        Command::Classify => commands::cmd_classify(&cfg).map(|report| {
            let failed = report.cells.iter().filter(|c| c.status != "ok").count();
            exit_code_for_failures(failed)
        }),
        Command::Report => commands::cmd_report(&cfg).map(|_| 0),
    };

    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
