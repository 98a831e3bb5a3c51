use clap::{Parser, Subcommand};
use lle_cli::config::ExperimentConfig;
use lle_cli::runner::{run, RunError};
use lle_cli::ExperimentKind;
use std::path::PathBuf;
use std::process::ExitCode;

/// Traveling-wave continuation experiments for the dual-pumped
/// Lugiato-Lefever equation.
///
/// Every subcommand reads a TOML experiment config, runs the named
/// study, and writes deterministic CSV/JSON data files plus a manifest
/// into the output directory. Exit codes: 0 ok, 1 config error,
/// 2 numerical failure, 3 partial results.
#[derive(Parser)]
#[command(name = "lle", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long, env = "LLE_CONFIG")]
    config: PathBuf,
    /// Output directory for data files and the manifest.
    #[arg(long, env = "LLE_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep-level parallelism (default: all cores).
    #[arg(long, env = "LLE_THREADS")]
    threads: Option<usize>,
    /// Override the grid size from the config.
    #[arg(long, env = "LLE_N")]
    n: Option<usize>,
    #[arg(long, short, env = "LLE_VERBOSE", default_value_t = false)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the curve of constant solutions and its turning points.
    TrivialBranch(CommonArgs),
    /// Trace one two-sided continuation branch.
    Continue(CommonArgs),
    /// Trace branches from all constant solutions over a detuning list.
    Sweep(CommonArgs),
    /// Trace at one detuning and analyze every f1 = 0 crossing.
    BifurcationScan(CommonArgs),
    /// Sign of the second derivative of the squared norm along the
    /// trivial curve.
    SignMap(CommonArgs),
    /// A-priori bounds, uniqueness and continuation verdicts.
    BoundsReport(CommonArgs),
    /// Re-run a canonical experiment (targets fig2, fig5, fig6).
    ReproduceFig(CommonArgs),
    /// Bisect the loop-connectivity threshold over a detuning bracket.
    LocateThreshold(CommonArgs),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &CommonArgs) {
        match self {
            Command::TrivialBranch(a) => (ExperimentKind::TrivialBranch, a),
            Command::Continue(a) => (ExperimentKind::Continue, a),
            Command::Sweep(a) => (ExperimentKind::Sweep, a),
            Command::BifurcationScan(a) => (ExperimentKind::BifurcationScan, a),
            Command::SignMap(a) => (ExperimentKind::SignMap, a),
            Command::BoundsReport(a) => (ExperimentKind::BoundsReport, a),
            Command::ReproduceFig(a) => (ExperimentKind::ReproduceFig, a),
            Command::LocateThreshold(a) => (ExperimentKind::LocateThreshold, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();

    if let Some(threads) = args.threads {
        // a later duplicate initialization only matters in-process; the
        // error is harmless for a CLI run
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = args.n {
        config.grid.n = n;
        if let Err(e) = config.validate() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    match run(&config, Some(kind), &args.out) {
        Ok(summary) => {
            if args.verbose {
                for path in &summary.outputs {
                    println!("wrote {}", path.display());
                }
                for note in &summary.notes {
                    println!("note: {note}");
                }
            }
            if summary.partial {
                eprintln!("warning: partial results ({} notes)", summary.notes.len());
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
