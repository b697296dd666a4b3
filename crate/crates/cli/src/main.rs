use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hord_core::study::{AlgorithmSummary, StudyOutcome};
use hord_core::{report, run_study, Algorithm, RunError, StudyConfig, StudyError, StudySummary};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_EVALUATOR: u8 = 3;

/// Surrogate-based optimizer for expensive black-box objectives.
#[derive(Parser)]
#[command(name = "hord", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study: every selected algorithm for every trial.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Algorithms to run (repeatable); replaces the config's list.
        #[arg(long = "algo", value_name = "ALGO")]
        algos: Vec<Algorithm>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summary.json and curves.csv from a study's traces.
    Report {
        #[arg(long)]
        study: PathBuf,
    },
    /// Check a configuration without evaluating anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &StudyError) -> u8 {
    match e {
        StudyError::Config(_)
        | StudyError::Run {
            source: RunError::ConfigInvalid(_),
            ..
        } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn print_summary(summary: &StudySummary) {
    println!(
        "{:<12} {:>6} {:>14} {:>12} {:>14}",
        "algorithm", "trials", "mean best f", "std", "median"
    );
    for s in &summary.algorithms {
        let AlgorithmSummary {
            algorithm,
            trials,
            mean_best_f,
            std_best_f,
            median_best_f,
            ..
        } = s;
        println!(
            "{:<12} {trials:>6} {mean_best_f:>14.6e} {std_best_f:>12.4e} {median_best_f:>14.6e}",
            algorithm.name()
        );
    }
    if let Some(target) = summary.target {
        println!("\nevaluations to reach {target}:");
        for s in &summary.algorithms {
            let cells: Vec<String> = s
                .evaluations_to_target
                .iter()
                .flatten()
                .map(|e| e.map_or("-".into(), |n| n.to_string()))
                .collect();
            println!("  {:<12} {}", s.algorithm.name(), cells.join(" "));
        }
    }
    if !summary.comparisons.is_empty() {
        println!("\nrank-sum p-values:");
        for c in &summary.comparisons {
            let p = c.p_value.map_or("n/a".into(), |p| format!("{p:.4}"));
            println!("  {} vs {}: {p}", c.a, c.b);
        }
    }
}

fn run(
    config: &Path,
    algos: Vec<Algorithm>,
    trials: Option<usize>,
    max_evals: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<StudyOutcome, StudyError> {
    let mut cfg = StudyConfig::from_path(config)?;
    if !algos.is_empty() {
        cfg.algorithms = algos;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(n) = max_evals {
        cfg.max_evals = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    let outcome = run_study(&cfg)?;
    println!("study written to {}\n", cfg.out.display());
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            algos,
            trials,
            max_evals,
            seed,
            out,
        } => run(&config, algos, trials, max_evals, seed, out).map(|outcome| {
            print_summary(&outcome.summary);
            for f in &outcome.failures {
                eprintln!(
                    "{} trial {}: evaluator failed: {}",
                    f.algorithm, f.trial, f.message
                );
            }
            if outcome.failures.is_empty() {
                0
            } else {
                EXIT_EVALUATOR
            }
        }),
        Command::Report { study } => report(&study).map(|summary| {
            print_summary(&summary);
            0
        }),
        Command::Validate { config } => StudyConfig::from_path(&config)
            .and_then(|cfg| cfg.validate())
            .map(|_| {
                println!("{}: ok", config.display());
                0
            }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
