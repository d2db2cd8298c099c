use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cubicqn_bench::check::run_checks;
use cubicqn_bench::{run_experiment, write_outputs, BenchError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cubicqn", version, about = "Run and compare cubic-regularized quasi-Newton solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces, plots and a summary.
    Run(RunArgs),
    /// Derivative and invariant self-test.
    Check,
    /// Run an experiment and print the summary table only.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(n) = self.max_iters {
            cfg.stop.max_iters = n;
        }
        Ok(cfg)
    }
}

fn execute(args: &RunArgs, write: bool) -> Result<usize, BenchError> {
    let cfg = args.load()?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.summary.table());
    if write {
        for path in write_outputs(&out, &cfg.out_dir)? {
            log::info!("wrote {}", path.display());
        }
    }
    Ok(out.summary.failures())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check => {
            let lines = run_checks();
            for l in &lines {
                println!("{:<14} {}  {}", l.name, if l.passed { "ok" } else { "FAILED" }, l.detail);
            }
            return if lines.iter().all(|l| l.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Command::Run(args) => execute(args, true),
        Command::Compare(args) => execute(args, false),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} method(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
