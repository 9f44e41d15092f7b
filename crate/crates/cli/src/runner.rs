//! Thread-parallel survey. Each start depends only on its run index, and
//! records are gathered in index order, so the result does not depend on the
//! number of worker threads.

use rayon::prelude::*;

use qlandscape_core::{
    cross_evaluate_summary, run_one, summarize, CrossObjectiveReport, ObjectiveKind, ObjectiveSpec,
    SurveyConfig, SurveySummary,
};

use crate::error::{CliError, Result};

pub fn run_survey_parallel(config: &SurveyConfig) -> Result<SurveySummary> {
    config.validate()?;
    let problem = config.problem()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()?;
    let records = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|i| run_one(config, &problem, i))
            .collect()
    });
    Ok(summarize(config, records))
}

/// Parallel counterpart of `qlandscape_core::cross_objective_experiment`.
pub fn run_cross_objective(
    config: &SurveyConfig,
    from: ObjectiveKind,
    to: ObjectiveKind,
) -> Result<(SurveySummary, CrossObjectiveReport)> {
    if from == ObjectiveKind::Frobenius || to == ObjectiveKind::Frobenius {
        return Err(CliError::Core(qlandscape_core::Error::NotStateObjective));
    }
    let mut cfg = config.clone();
    cfg.objective.kind = from;
    let summary = run_survey_parallel(&cfg)?;
    let to = ObjectiveSpec::new(cfg.objective.gate, to);
    let report = cross_evaluate_summary(&cfg.params, &summary, &to)?;
    Ok((summary, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qlandscape_core::{run_survey, GateId, StateSetKind};

    #[test]
    fn matches_sequential_survey_for_any_thread_count() {
        let mut cfg = SurveyConfig {
            objective: ObjectiveSpec::new(GateId::T, ObjectiveKind::States(StateSetKind::Set4)),
            runs: 12,
            master_seed: 99,
            ..SurveyConfig::default()
        };
        let sequential = run_survey(&cfg).unwrap();
        for threads in [1, 3] {
            cfg.parallelism = threads;
            assert_eq!(run_survey_parallel(&cfg).unwrap(), sequential);
        }
    }
}
