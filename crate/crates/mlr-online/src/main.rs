//! Command-line interface: simulation dumps, single estimator runs,
//! the batch EM baseline, the mean-field lab, and the full studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mlr_online::harness::config::ExperimentConfig;
use mlr_online::harness::experiments::{
    run_bounds, run_fig1, run_fig2, run_fit_asym, run_fit_pop_em, run_fit_sym, run_ode,
    run_simulate,
};

#[derive(Parser)]
#[command(
    name = "mlr",
    version,
    about = "Streaming identification and clustering for two-component mixed linear regression"
)]
struct Cli {
    /// JSON experiment configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override (default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replication-count override.
    #[arg(long, global = true)]
    replications: Option<u32>,
    /// Run the estimators on whitened regressors.
    #[arg(long, global = true)]
    whiten: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the simulated labelled stream to CSV.
    Simulate,
    /// Run the sign-symmetric streaming estimator once.
    FitSym,
    /// Run the two-branch streaming estimator once.
    FitAsym,
    /// Fit the batch EM baseline once.
    FitPopEm,
    /// Integrate the mean-field flow of the sign-symmetric estimator.
    Ode,
    /// Run a full study.
    Experiment {
        #[arg(value_enum)]
        which: StudyKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StudyKind {
    /// Single-run estimation trace with online clustering.
    Fig1,
    /// Convergence-probability sweep over the initialization radius.
    Fig2,
    /// Clustering bound versus empirical performance.
    Bounds,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("experiment checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> mlr_online::Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(replications) = cli.replications {
        config.replications = replications;
    }
    if cli.whiten {
        config.whiten = true;
    }
    if let Some(out) = cli.out {
        config.output_dir = Some(out);
    }
    config.validate()?;
    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Simulate => {
            let path = run_simulate(&config, &out_dir)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::FitSym => {
            let summary = run_fit_sym(&config, &out_dir)?;
            println!(
                "aligned error {} (relative {}) after {} steps; outputs in {}",
                summary.error,
                summary.relative_error,
                summary.horizon,
                out_dir.display()
            );
            Ok(true)
        }
        Command::FitAsym => {
            let summary = run_fit_asym(&config, &out_dir)?;
            println!(
                "aligned errors ({}, {}) after {} steps; outputs in {}",
                summary.err1,
                summary.err2,
                summary.horizon,
                out_dir.display()
            );
            Ok(true)
        }
        Command::FitPopEm => {
            let summary = run_fit_pop_em(&config, &out_dir)?;
            println!(
                "converged: {} (relative error {}, {} iterations); outputs in {}",
                summary.converged,
                summary.relative_error,
                summary.iterations_run,
                out_dir.display()
            );
            Ok(true)
        }
        Command::Ode => {
            let summary = run_ode(&config, &out_dir)?;
            println!(
                "final V {} at horizon {}; outputs in {}",
                summary.final_v,
                summary.horizon,
                out_dir.display()
            );
            Ok(true)
        }
        Command::Experiment { which } => match which {
            StudyKind::Fig1 => {
                let dir = out_dir.join("fig1");
                let summary = run_fig1(&config, &dir)?;
                println!(
                    "final aligned errors ({}, {}), final clustering error {}; outputs in {}",
                    summary.final_err1,
                    summary.final_err2,
                    summary.final_jn,
                    dir.display()
                );
                Ok(true)
            }
            StudyKind::Fig2 => {
                let dir = out_dir.join("fig2");
                let summary = run_fig2(&config, &dir)?;
                for row in &summary.rows {
                    println!(
                        "kappa {}: online fraction {}, batch EM fraction {}",
                        row.kappa, row.online_fraction, row.pop_em_fraction
                    );
                }
                println!("outputs in {}", dir.display());
                Ok(true)
            }
            StudyKind::Bounds => {
                let dir = out_dir.join("bounds");
                let outcome = run_bounds(&config, &dir)?;
                for check in &outcome.checks {
                    println!(
                        "[{}] {}: observed {}, requirement {}",
                        if check.pass { "PASS" } else { "FAIL" },
                        check.check,
                        check.observed,
                        check.requirement
                    );
                }
                println!("outputs in {}", dir.display());
                Ok(outcome.passed)
            }
        },
    }
}
