//! `nesy`: generate datasets, train and evaluate the benchmark tasks,
//! benchmark them, and run the gradient-check suites.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
//! error.

use clap::{Args, Parser, Subcommand};
use nesy_cli::config::{self, Overrides};
use nesy_cli::errors::CliError;
use nesy_cli::{commands, gradcheck};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nesy", about = "Neurosymbolic reasoning benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a task dataset plus a checksum manifest.
    Gen(CommonArgs),
    /// Train a task; writes checkpoints and metrics.json.
    Train(CommonArgs),
    /// Evaluate previously trained checkpoints.
    Eval(CommonArgs),
    /// Benchmark tasks: per-sample times and peak memory over repeated runs.
    Bench(CommonArgs),
    /// Finite-difference gradient checks for all analytic gradient paths.
    Gradcheck(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Task: mnist-sum, shapes, toy-ner or math.
    #[arg(long)]
    task: Option<String>,
    /// Semiring: topk:N, exact, maxmin, addmult or bool.
    #[arg(long)]
    semiring: Option<String>,
    /// Neural/symbolic interplay: reasoner, soft-constraint, sampling or
    /// primal-dual.
    #[arg(long)]
    interplay: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            task: self.task.clone(),
            semiring: self.semiring.clone(),
            interplay: self.interplay.clone(),
            seed: self.seed,
            epochs: self.epochs,
            out: self.out.clone(),
            ..Default::default()
        }
    }

    fn file_overrides(&self) -> Result<Option<Overrides>, CliError> {
        match &self.config {
            None => Ok(None),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                Ok(Some(Overrides::from_file(&text)?))
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, for_bench) = match &cli.cmd {
        Cmd::Gen(a) | Cmd::Train(a) | Cmd::Eval(a) | Cmd::Gradcheck(a) => (a.clone(), false),
        Cmd::Bench(a) => (a.clone(), true),
    };
    let cfg = config::resolve(args.file_overrides()?, args.overrides(), for_bench)?;
    match cli.cmd {
        Cmd::Gen(_) => commands::cmd_gen(&cfg),
        Cmd::Train(_) => commands::cmd_train(&cfg),
        Cmd::Eval(_) => commands::cmd_eval(&cfg),
        Cmd::Bench(_) => commands::cmd_bench(&cfg).map(|_| ()),
        Cmd::Gradcheck(_) => {
            if gradcheck::run_all(1000) {
                Ok(())
            } else {
                Err(CliError::Internal("gradient check failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
