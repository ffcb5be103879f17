use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lqf_cli::{experiments, load_spec, CliError};
use lqf_core::oracle::{OracleOptions, DEFAULT_MAX_TOTAL_TASKS};
use lqf_core::{solve_fluid, uniformization_oracle, CountState, FluidConfig, SystemConfig};

#[derive(Parser)]
#[command(name = "lqf", version, about = "Randomized longest-queue-first experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON spec file.
    Run {
        spec: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed (overrides `master_seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the fluid solution from an empty start as CSV.
    Fluid {
        #[arg(long)]
        lambda: f64,
        #[arg(long = "K")]
        levels: usize,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = lqf_core::fluid::DEFAULT_DT)]
        dt: f64,
    },
    /// Print the exact transient law of a small system as CSV.
    Oracle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_TOTAL_TASKS)]
        max_total_tasks: usize,
    },
}

fn execute(command: Command) -> Result<Option<String>, CliError> {
    match command {
        Command::Run { spec, out, workers, seed } => {
            let mut spec = load_spec(&spec)?;
            if let Some(seed) = seed {
                spec.master_seed = seed;
            }
            if let Some(out) = out {
                spec.output_dir = out.to_string_lossy().into_owned();
            }
            let workers = workers.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            });
            if workers == 0 {
                return Err(CliError::Spec("--workers must be at least 1".into()));
            }
            let artifacts = experiments::run(&spec, workers)?;
            experiments::write_artifacts(spec.output_dir.as_ref(), &artifacts)?;
            let listing: String = artifacts
                .iter()
                .map(|a| format!("{}\n", PathBuf::from(&spec.output_dir).join(&a.file_name).display()))
                .collect();
            eprint!("{listing}");
            Ok(None)
        }
        Command::Fluid { lambda, levels, horizon, dt } => {
            let config = FluidConfig { dt, ..FluidConfig::empty_start(lambda, levels, horizon) };
            Ok(Some(solve_fluid(&config)?.to_csv()))
        }
        Command::Oracle { n, d, lambda, t, max_total_tasks } => {
            let config = SystemConfig::new(n, d, lambda, 0.0, 0)?;
            let options = OracleOptions { max_total_tasks, ..OracleOptions::default() };
            let result = uniformization_oracle(&config, &CountState::empty(n)?, t, options)?;
            eprintln!("truncation error bound: {:e}", result.truncation_error_bound);
            Ok(Some(result.to_csv()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(stdout) => {
            if let Some(text) = stdout {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
