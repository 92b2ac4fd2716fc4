use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use noma_waterfill::harness::document::write_document;
use noma_waterfill::harness::{self, ExperimentConfig, SolveOutcome};
use noma_waterfill::{oracle, Error, SolverOptions};

/// Optimal power allocation for downlink multi-cluster NOMA.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance document and write the optimal powers.
    Solve {
        instance: PathBuf,
        /// Output path (.json or .toml); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = SolverOptions::default().eps)]
        eps: f64,
        #[arg(long, default_value_t = SolverOptions::default().max_iter)]
        max_iter: usize,
    },
    /// Report minimum cluster budgets and whether the demands can be met.
    Feasibility {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep described by a TOML config and write a CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solver against the independent oracles on random instances.
    Verify {
        /// Optional TOML config; only `eps` and `max_iter` are used.
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of random instances.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_INFEASIBLE: u8 = 2;

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve { instance, out, eps, max_iter } => {
            match harness::solve_file(&instance, out.as_deref(), SolverOptions { eps, max_iter })? {
                SolveOutcome::Optimal(_) => Ok(ExitCode::SUCCESS),
                SolveOutcome::Infeasible(why) => {
                    eprintln!("infeasible: {why}");
                    Ok(ExitCode::from(EXIT_INFEASIBLE))
                }
            }
        }
        Command::Feasibility { instance, out } => {
            let doc = harness::feasibility_file(&instance, out.as_deref())?;
            Ok(if doc.feasible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INFEASIBLE) })
        }
        Command::Sweep { config, seed, trials, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.scenario.seed = seed;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            if let Some(out) = out {
                cfg.output_path = out;
            }
            let rows = harness::run_sweep(&cfg)?;
            harness::emit_csv(&rows, &cfg.output_path)?;
            eprintln!("wrote {} rows to {}", rows.len(), cfg.output_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config, seed, trials, out } => {
            let options = match config {
                Some(path) => ExperimentConfig::load(&path)?.solver_options(),
                None => SolverOptions::default(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = oracle::agreement_suite(&mut rng, trials, options)?;
            write_document(&report, out.as_deref())?;
            let ok = report.q_min.max_rel_gap <= 1e-9
                && report.budgets.max_rel_gap <= 1e-6
                && report.objective.max_rel_gap <= 1e-8
                && report.max_residual <= options.eps
                && report.nonconverged == 0;
            if ok {
                eprintln!("oracle agreement: ok ({trials} instances)");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("oracle agreement: FAILED");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
