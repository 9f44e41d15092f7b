//! The `simulate`, `optimize`, `survey` and `report` commands.

use std::path::{Path, PathBuf};

use qlandscape_core::{
    descend, export_manifolds, propagate_evolution_matrix, propagate_state, sample_initial,
    BlochState, ControlVector, GateId, GateProblem, ObjectiveKind, RunRecord, SurveySummary,
    Termination,
};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, ExitCode, Result};
use crate::io::{self, Trajectory};
use crate::report;
use crate::runner::{run_cross_objective, run_survey_parallel};
use crate::svg::{self, Control, Quantity};

/// Flags shared by every command; each one overrides the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub gate: Option<GateId>,
    pub objective: Option<ObjectiveKind>,
    pub runs: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.survey.master_seed = seed;
        }
        if let Some(gate) = self.gate {
            cfg.gate = gate;
        }
        if let Some(kind) = self.objective {
            cfg.objective = kind;
        }
        if let Some(runs) = self.runs {
            cfg.survey.runs = runs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn simulate(cfg: &RunConfig, controls: &Path, r0: BlochState) -> Result<ExitCode> {
    let grid = cfg.time_grid()?;
    let controls = io::read_controls_csv(controls)?;
    let states = propagate_state(&cfg.system, &grid, &controls, &r0)?;
    let psi = propagate_evolution_matrix(&cfg.system, &grid, &controls)?;
    let traj = Trajectory {
        times: grid.boundaries().to_vec(),
        states,
        psi,
    };
    let dir = &cfg.output.directory;
    if cfg.output.wants(Format::Csv) {
        io::write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
    }
    if cfg.output.wants(Format::Json) {
        io::write_json(&dir.join("trajectory.json"), &traj)?;
    }
    Ok(ExitCode::Success)
}

/// Initial controls from `--init` (a controls CSV or a run-record JSON whose
/// final controls are reused) or else sampled from the seed.
fn initial_controls(cfg: &RunConfig, init: Option<&Path>) -> Result<ControlVector> {
    match init {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            Ok(io::read_json::<RunRecord>(path)?.final_controls())
        }
        Some(path) => io::read_controls_csv(path),
        None => Ok(sample_initial(
            cfg.survey.master_seed,
            0,
            &cfg.time_grid()?,
            cfg.survey.u_range,
            cfg.survey.n_range,
        )),
    }
}

pub fn optimize(cfg: &RunConfig, init: Option<&Path>) -> Result<(RunRecord, ExitCode)> {
    let problem = GateProblem::from_spec(cfg.system, cfg.time_grid()?, &cfg.spec())?;
    let start = initial_controls(cfg, init)?;
    let mut record = descend(&problem, &start, &cfg.optimizer)?;
    record.seed = cfg.survey.master_seed;
    let dir = &cfg.output.directory;
    io::write_json(&dir.join("run_record.json"), &record)?;
    if cfg.output.wants(Format::Csv) {
        io::write_controls_csv(&dir.join("final_controls.csv"), &record.final_controls())?;
    }
    let code = match record.termination {
        Termination::Converged | Termination::Stuck => ExitCode::Success,
        Termination::MaxIters => ExitCode::MaxIters,
        Termination::NonFinite => ExitCode::Numerical,
    };
    Ok((record, code))
}

/// Exit status of a finished survey: failure only when no run entered the
/// statistics or when most runs hit the iteration cap.
pub fn survey_exit_code(summary: &SurveySummary) -> ExitCode {
    let total = summary.records.len();
    if 2 * summary.excluded.max_iters > total {
        ExitCode::MaxIters
    } else if summary.excluded.total() == total {
        ExitCode::Numerical
    } else {
        ExitCode::Success
    }
}

pub fn survey(
    cfg: &RunConfig,
    svg_plots: bool,
    cross_to: Option<ObjectiveKind>,
) -> Result<(SurveySummary, ExitCode)> {
    let scfg = cfg.survey_config()?;
    let dir = &cfg.output.directory;
    let summary = match cross_to {
        Some(to) => {
            let (summary, cross) = run_cross_objective(&scfg, scfg.objective.kind, to)?;
            io::write_json(&dir.join("cross_objective.json"), &cross)?;
            summary
        }
        None => run_survey_parallel(&scfg)?,
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    let bundles = export_manifolds(&summary);
    if cfg.output.wants(Format::Json) {
        io::write_json(&dir.join("manifolds.json"), &bundles)?;
    }
    if cfg.output.wants(Format::Csv) {
        io::write_manifold_csv(&dir.join("manifolds.csv"), &bundles)?;
        io::write_histogram_csv(
            &dir.join("histogram_objective.csv"),
            &summary.objective_histogram,
        )?;
        io::write_histogram_csv(
            &dir.join("histogram_frobenius.csv"),
            &summary.frobenius_histogram,
        )?;
    }
    if svg_plots {
        io::write_text(
            &dir.join("histogram_objective.svg"),
            &svg::histogram(&summary, Quantity::Objective),
        )?;
        io::write_text(
            &dir.join("histogram_frobenius.svg"),
            &svg::histogram(&summary, Quantity::Frobenius),
        )?;
        io::write_text(
            &dir.join("controls_u.svg"),
            &svg::controls(&bundles, Control::U),
        )?;
        io::write_text(
            &dir.join("controls_n.svg"),
            &svg::controls(&bundles, Control::N),
        )?;
    }
    let code = survey_exit_code(&summary);
    Ok((summary, code))
}

/// Table rows for every summary file, in argument order.
pub fn report(summaries: &[PathBuf], out: Option<&Path>) -> Result<String> {
    if summaries.is_empty() {
        return Err(CliError::Usage(
            "report needs at least one summary file".into(),
        ));
    }
    let mut rows = Vec::new();
    for path in summaries {
        let summary: SurveySummary = io::read_json(path)?;
        rows.extend(
            report::rows(&summary)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        );
    }
    if let Some(dir) = out {
        io::write_text(&dir.join("table.csv"), &report::render_csv(&rows))?;
    }
    Ok(report::render_text(&rows))
}
