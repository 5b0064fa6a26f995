//! `dflbench`: run experiment sweeps, plot their results, check configs.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dfl_core::bench::{
    emit_plot, run_experiment, ExperimentSpec, PlotKind, RawTable, RESULTS_FILE,
};
use dfl_core::Error;

#[derive(Parser)]
#[command(
    name = "dflbench",
    version,
    about = "Seeded DFL resource-allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "cost_vs_iter")]
    CostVsIter,
    #[value(name = "cost_vs_sweep")]
    CostVsSweep,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON spec and write its CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the spec's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render a results CSV as an SVG line plot.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a spec without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::from_file(path)?;
    spec.apply_env_overrides()?;
    spec.validate()?;
    Ok(spec)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, out, jobs } => {
            let spec = load(&config)?;
            if jobs == Some(0) {
                return Err(Error::Validation("--jobs must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
            let output = pool.install(|| run_experiment(&spec))?;
            let dir = out.unwrap_or_else(|| spec.output_dir.clone());
            let written = output.write_to(&dir)?;
            for path in &written {
                println!("wrote {}", path.display());
            }
            if !output.failures.is_empty() {
                eprintln!("{} run(s) failed; see errors.csv", output.failures.len());
            }
            if !written.iter().any(|p| p.ends_with(RESULTS_FILE)) {
                return Err(Error::Contract(
                    "every run failed; no results written".into(),
                ));
            }
            Ok(())
        }
        Command::Plot { input, kind, out } => {
            let table = RawTable::read(&input)?;
            let kind = match kind {
                Kind::CostVsIter => PlotKind::CostVsIter,
                Kind::CostVsSweep => PlotKind::CostVsSweep,
            };
            emit_plot(&table, kind, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate { config } => {
            let spec = load(&config)?;
            let points = spec.points()?.len();
            println!(
                "ok: {} scheme(s) x {} sweep point(s) x {} seed(s)",
                spec.schemes.len(),
                points,
                spec.num_seeds
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
