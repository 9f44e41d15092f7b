use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use qlandscape::commands::{self, Overrides};
use qlandscape::{CliError, ExitCode};
use qlandscape_core::{BlochState, GateId, ObjectiveKind};

/// Open-qubit gate generation: simulation, GRAPE optimization and
/// control-landscape surveys.
#[derive(Parser)]
#[command(name = "qlandscape", version)]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Target gate: H, T, rotation:THETA or phase:DELTA.
    #[arg(long, global = true)]
    gate: Option<GateId>,
    /// Objective: set2, set3-grk, set4 or frobenius.
    #[arg(long, global = true)]
    objective: Option<ObjectiveKind>,
    /// Number of random starts.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a state under given controls.
    Simulate {
        /// CSV with columns u,n, one row per interval.
        #[arg(long)]
        controls: PathBuf,
        /// Initial Bloch vector as x,y,z.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 1.0])]
        r0: Vec<f64>,
    },
    /// One gradient descent.
    Optimize {
        /// Start from these controls (CSV u,n or a run-record JSON) instead of
        /// a seeded random start.
        #[arg(long, conflicts_with = "seed")]
        init: Option<PathBuf>,
    },
    /// Multi-start survey with histograms, peaks and control bundles.
    Survey {
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
        /// Also score every optimum under this state objective.
        #[arg(long)]
        cross_to: Option<ObjectiveKind>,
    },
    /// Peak table from survey summaries.
    Report {
        /// summary.json files.
        summaries: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let overrides = Overrides {
        config: cli.config,
        out: cli.out.clone(),
        seed: cli.seed,
        gate: cli.gate,
        objective: cli.objective,
        runs: cli.runs,
    };
    match cli.command {
        Command::Simulate { controls, r0 } => {
            if r0.len() != 3 {
                return Err(CliError::Usage(format!(
                    "--r0 needs 3 components, got {}",
                    r0.len()
                )));
            }
            let cfg = overrides.resolve()?;
            commands::simulate(&cfg, &controls, BlochState::new(r0[0], r0[1], r0[2]))
        }
        Command::Optimize { init } => {
            let cfg = overrides.resolve()?;
            let (record, code) = commands::optimize(&cfg, init.as_deref())?;
            eprintln!(
                "{:?} after {} accepted steps: objective {:.6e}, F_U {:.6e}",
                record.termination, record.iterations, record.objective, record.frobenius
            );
            Ok(code)
        }
        Command::Survey { svg, cross_to } => {
            let cfg = overrides.resolve()?;
            let (summary, code) = commands::survey(&cfg, svg, cross_to)?;
            let included = summary.records.len() - summary.excluded.total();
            eprintln!(
                "{}: {} runs, {} included, {} hit max_iters, {} non-finite, {} peak(s)",
                summary.objective.label(),
                summary.records.len(),
                included,
                summary.excluded.max_iters,
                summary.excluded.non_finite,
                summary.peak_count()
            );
            Ok(code)
        }
        Command::Report { summaries } => {
            print!("{}", commands::report(&summaries, cli.out.as_deref())?);
            Ok(ExitCode::Success)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            process::exit(if e.use_stderr() {
                ExitCode::Usage as i32
            } else {
                0
            });
        }
    };
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    process::exit(code as i32);
}
