//! Multi-start landscape survey: random initial controls, one descent per
//! start, histograms, peak detection and peak-grouped control bundles.
//!
//! [`run_survey`] runs the starts one after another. Each start depends only
//! on `(master_seed, run_index)`, so a parallel runner can call [`run_one`]
//! in any order and hand the records to [`summarize`] in run-index order.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlVector, SystemParams, TimeGrid};
use crate::error::{Error, Result};
use crate::grape::{descend, OptimizerConfig, RunRecord, Termination};
use crate::objectives::{
    cross_evaluate, GateId, GateProblem, ObjectiveKind, ObjectiveSpec, StateSetKind,
};

/// A peak is split in two only if each side holds at least this share of the
/// values.
pub const MIN_PEAK_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurveyConfig {
    pub params: SystemParams,
    pub grid: TimeGrid,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerConfig,
    /// Number of random starts `L`.
    #[serde(rename = "L")]
    pub runs: usize,
    pub master_seed: u64,
    pub u_range: [f64; 2],
    pub n_range: [f64; 2],
    pub histogram_bins: usize,
    /// Worker count for parallel runners. Never affects results.
    pub parallelism: usize,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            grid: TimeGrid::default(),
            objective: ObjectiveSpec::new(
                GateId::Hadamard,
                ObjectiveKind::States(StateSetKind::Set3Grk),
            ),
            optimizer: OptimizerConfig::default(),
            runs: 1000,
            master_seed: 0,
            u_range: [-1.0, 1.0],
            n_range: [0.0, 1.0],
            histogram_bins: 100,
            parallelism: 1,
        }
    }
}

impl SurveyConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.optimizer.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidSurvey("L must be at least 1"));
        }
        if !valid_range(self.u_range) {
            return Err(Error::InvalidSurvey("u_range must be finite with lo <= hi"));
        }
        if !valid_range(self.n_range) || self.n_range[0] < 0.0 {
            return Err(Error::InvalidSurvey(
                "n_range must be finite, nonnegative, with lo <= hi",
            ));
        }
        if self.histogram_bins < 2 {
            return Err(Error::InvalidSurvey("histogram_bins must be at least 2"));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidSurvey("parallelism must be at least 1"));
        }
        if self.objective.kind == ObjectiveKind::Frobenius {
            return Err(Error::NotStateObjective);
        }
        Ok(())
    }

    /// The state objective being surveyed.
    pub fn problem(&self) -> Result<GateProblem> {
        GateProblem::from_spec(self.params, self.grid.clone(), &self.objective)
    }
}

fn valid_range(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

/// Initial controls for one start: `u_k` and `n_k` uniform on their ranges,
/// independently per interval, with `w_k = +√n_k`.
///
/// Every run reads its own ChaCha8 stream (`run_index`) of the generator
/// seeded by `master_seed`.
pub fn sample_initial(
    master_seed: u64,
    run_index: u64,
    grid: &TimeGrid,
    u_range: [f64; 2],
    n_range: [f64; 2],
) -> ControlVector {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    let m = grid.intervals();
    let mut u = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for _ in 0..m {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        u.push(u_range[0] + (u_range[1] - u_range[0]) * a);
        w.push(libm::sqrt(n_range[0] + (n_range[1] - n_range[0]) * b));
    }
    ControlVector { u, w }
}

/// One start of the survey. Failures become a `NON_FINITE` record so they
/// show up in the tally instead of vanishing.
pub fn run_one(config: &SurveyConfig, problem: &GateProblem, run_index: usize) -> RunRecord {
    let init = sample_initial(
        config.master_seed,
        run_index as u64,
        &config.grid,
        config.u_range,
        config.n_range,
    );
    let mut record = descend(problem, &init, &config.optimizer).unwrap_or_else(|_| RunRecord {
        seed: 0,
        termination: Termination::NonFinite,
        iterations: 0,
        rejections: 0,
        initial_objective: f64::NAN,
        objective: f64::NAN,
        frobenius: f64::NAN,
        u: init.u.clone(),
        w: init.w.clone(),
        u0: init.u.clone(),
        w0: init.w.clone(),
        trace: None,
    });
    record.seed = config.master_seed;
    record
}

/// Equal-width bins over `[min, max]` of the values; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: usize) -> Self {
        if values.is_empty() || bins == 0 {
            return Self {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let step = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + step * i as f64).collect();
        edges.push(hi);
        let mut counts = alloc::vec![0usize; bins];
        for &v in values {
            let i = if step > 0.0 {
                (((v - lo) / step) as usize).min(bins - 1)
            } else {
                0
            };
            counts[i] += 1;
        }
        Self { edges, counts }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

/// Mean and doubled standard deviation of one cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakStats {
    pub center: f64,
    pub width: f64,
    pub count: usize,
}

impl PeakStats {
    /// Population statistics; `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // Shifted by the first value, so identical inputs give exactly width 0.
        let shift = values[0];
        let center = shift + values.iter().map(|v| v - shift).sum::<f64>() / n;
        let var = values
            .iter()
            .map(|v| (v - center) * (v - center))
            .sum::<f64>()
            / n;
        Some(Self {
            center,
            width: 2.0 * libm::sqrt(var),
            count: values.len(),
        })
    }

    fn of_labelled(values: &[f64], labels: &[usize], peak: usize) -> Option<Self> {
        let members: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == peak)
            .map(|(&v, _)| v)
            .collect();
        Self::of(&members)
    }
}

/// Clusters found by [`detect_peaks`], ordered by center, with one label per
/// input value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peaks {
    pub peaks: Vec<PeakStats>,
    pub labels: Vec<usize>,
}

/// 1-D two-means started from the extremes. The split is kept only when the
/// centers are more than `2(σ1 + σ2)` apart and each side holds at least
/// [`MIN_PEAK_FRACTION`] of the values; otherwise everything is one peak.
pub fn detect_peaks(values: &[f64]) -> Peaks {
    let single = || Peaks {
        peaks: PeakStats::of(values).into_iter().collect(),
        labels: alloc::vec![0; values.len()],
    };
    if values.len() < 2 {
        return single();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return single();
    }

    let (mut c1, mut c2) = (lo, hi);
    let mut labels: Vec<usize> = alloc::vec![usize::MAX; values.len()];
    loop {
        let mut changed = false;
        for (l, &v) in labels.iter_mut().zip(values) {
            let next = usize::from((v - c2).abs() < (v - c1).abs());
            if *l != next {
                *l = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let (Some(a), Some(b)) = (
            PeakStats::of_labelled(values, &labels, 0),
            PeakStats::of_labelled(values, &labels, 1),
        ) else {
            return single();
        };
        c1 = a.center;
        c2 = b.center;
    }

    let (Some(a), Some(b)) = (
        PeakStats::of_labelled(values, &labels, 0),
        PeakStats::of_labelled(values, &labels, 1),
    ) else {
        return single();
    };
    let min_count = MIN_PEAK_FRACTION * values.len() as f64;
    // Widths are 2σ, so the threshold 2(σ1 + σ2) is their sum.
    let separated = (b.center - a.center).abs() > a.width + b.width;
    if !separated || (a.count as f64) < min_count || (b.count as f64) < min_count {
        return single();
    }
    // Started from (min, max), cluster 0 always has the lower center.
    Peaks {
        peaks: alloc::vec![a, b],
        labels,
    }
}

/// Runs that ended in `MAX_ITERS` or `NON_FINITE` and were left out of the
/// statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionTally {
    pub max_iters: usize,
    pub non_finite: usize,
}

impl ExclusionTally {
    pub fn total(&self) -> usize {
        self.max_iters + self.non_finite
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub objective: ObjectiveSpec,
    pub master_seed: u64,
    pub boundaries: Vec<f64>,
    pub records: Vec<RunRecord>,
    pub objective_histogram: Histogram,
    pub frobenius_histogram: Histogram,
    pub objective_peaks: Vec<PeakStats>,
    /// Frobenius statistics over the objective's peak memberships.
    pub frobenius_peaks: Vec<PeakStats>,
    /// Peak index per record; `None` for excluded runs.
    pub labels: Vec<Option<usize>>,
    pub excluded: ExclusionTally,
}

impl SurveySummary {
    /// Records that entered the statistics.
    pub fn included(&self) -> impl Iterator<Item = (usize, &RunRecord, usize)> + '_ {
        self.records
            .iter()
            .zip(&self.labels)
            .enumerate()
            .filter_map(|(i, (r, l))| l.map(|l| (i, r, l)))
    }

    pub fn peak_count(&self) -> usize {
        self.objective_peaks.len()
    }
}

/// Assembles the statistics from records given in run-index order.
pub fn summarize(config: &SurveyConfig, records: Vec<RunRecord>) -> SurveySummary {
    let mut excluded = ExclusionTally::default();
    let mut objective = Vec::new();
    let mut frobenius = Vec::new();
    for r in &records {
        match r.termination {
            Termination::MaxIters => excluded.max_iters += 1,
            Termination::NonFinite => excluded.non_finite += 1,
            Termination::Converged | Termination::Stuck => {
                objective.push(r.objective);
                frobenius.push(r.frobenius);
            }
        }
    }

    let peaks = detect_peaks(&objective);
    let frobenius_peaks = (0..peaks.peaks.len())
        .filter_map(|p| PeakStats::of_labelled(&frobenius, &peaks.labels, p))
        .collect();
    let mut next = peaks.labels.iter().copied();
    let labels = records
        .iter()
        .map(|r| {
            if r.termination.is_normal() {
                next.next()
            } else {
                None
            }
        })
        .collect();

    SurveySummary {
        objective: config.objective,
        master_seed: config.master_seed,
        boundaries: config.grid.boundaries().to_vec(),
        objective_histogram: Histogram::build(&objective, config.histogram_bins),
        frobenius_histogram: Histogram::build(&frobenius, config.histogram_bins),
        objective_peaks: peaks.peaks,
        frobenius_peaks,
        labels,
        excluded,
        records,
    }
}

/// Sequential survey.
pub fn run_survey(config: &SurveyConfig) -> Result<SurveySummary> {
    config.validate()?;
    let problem = config.problem()?;
    let records = (0..config.runs)
        .map(|i| run_one(config, &problem, i))
        .collect();
    Ok(summarize(config, records))
}

/// Final controls of every member of one peak, ready for overlay plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBundle {
    pub peak: usize,
    pub boundaries: Vec<f64>,
    pub run_ids: Vec<usize>,
    pub u: Vec<Vec<f64>>,
    /// `n_k = w_k²`.
    pub n: Vec<Vec<f64>>,
}

impl ManifoldBundle {
    pub fn len(&self) -> usize {
        self.run_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.run_ids.is_empty()
    }
}

pub fn export_manifolds(summary: &SurveySummary) -> Vec<ManifoldBundle> {
    let mut bundles: Vec<ManifoldBundle> = (0..summary.peak_count())
        .map(|peak| ManifoldBundle {
            peak,
            boundaries: summary.boundaries.clone(),
            run_ids: Vec::new(),
            u: Vec::new(),
            n: Vec::new(),
        })
        .collect();
    for (id, r, peak) in summary.included() {
        let b = &mut bundles[peak];
        b.run_ids.push(id);
        b.u.push(r.u.clone());
        b.n.push(r.w.iter().map(|w| w * w).collect());
    }
    bundles
}

/// Optimized controls of one objective evaluated under another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossObjectiveReport {
    pub from: ObjectiveSpec,
    pub to: ObjectiveSpec,
    pub from_peaks: Vec<PeakStats>,
    /// `to` values for the included records, in run-index order.
    pub substituted: Vec<f64>,
    pub substituted_peaks: Vec<PeakStats>,
    pub substituted_mean: f64,
}

pub fn cross_evaluate_summary(
    params: &SystemParams,
    summary: &SurveySummary,
    to: &ObjectiveSpec,
) -> Result<CrossObjectiveReport> {
    let grid = TimeGrid::from_boundaries(summary.boundaries.clone())?;
    let substituted = summary
        .included()
        .map(|(_, r, _)| cross_evaluate(params, &grid, &r.final_controls(), to))
        .collect::<Result<Vec<f64>>>()?;
    let substituted_mean = if substituted.is_empty() {
        f64::NAN
    } else {
        substituted.iter().sum::<f64>() / substituted.len() as f64
    };
    Ok(CrossObjectiveReport {
        from: summary.objective,
        to: *to,
        from_peaks: summary.objective_peaks.clone(),
        substituted_peaks: detect_peaks(&substituted).peaks,
        substituted,
        substituted_mean,
    })
}

/// Surveys `from` for the configured gate, then scores every optimum under
/// `to`. Both must be state objectives.
pub fn cross_objective_experiment(
    config: &SurveyConfig,
    from: ObjectiveKind,
    to: ObjectiveKind,
) -> Result<(SurveySummary, CrossObjectiveReport)> {
    if from == ObjectiveKind::Frobenius || to == ObjectiveKind::Frobenius {
        return Err(Error::NotStateObjective);
    }
    let mut cfg = config.clone();
    cfg.objective.kind = from;
    let summary = run_survey(&cfg)?;
    let to = ObjectiveSpec::new(cfg.objective.gate, to);
    let report = cross_evaluate_summary(&cfg.params, &summary, &to)?;
    Ok((summary, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn normal_samples(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let a: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let b: f64 = rng.random();
                mean + sd * (-2.0 * a.ln()).sqrt() * (2.0 * core::f64::consts::PI * b).cos()
            })
            .collect()
    }

    /// Kolmogorov–Smirnov distance of the sample from Uniform[lo, hi].
    fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x - lo) / (hi - lo);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let grid = TimeGrid::default();
        let a = sample_initial(7, 3, &grid, [-1.0, 1.0], [0.0, 1.0]);
        let b = sample_initial(7, 3, &grid, [-1.0, 1.0], [0.0, 1.0]);
        let c = sample_initial(7, 4, &grid, [-1.0, 1.0], [0.0, 1.0]);
        let d = sample_initial(8, 3, &grid, [-1.0, 1.0], [0.0, 1.0]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a.intervals(), 10);
    }

    #[test]
    fn degenerate_incoherent_range_gives_zero_w() {
        let c = sample_initial(1, 0, &TimeGrid::default(), [-1.0, 1.0], [0.0, 0.0]);
        assert!(c.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn marginals_pass_ks_uniformity() {
        let grid = TimeGrid::regular(1.0, 1).unwrap();
        let samples: Vec<ControlVector> = (0..100_000)
            .map(|i| sample_initial(2024, i, &grid, [-1.0, 1.0], [0.0, 1.0]))
            .collect();
        let u: Vec<f64> = samples.iter().map(|c| c.u[0]).collect();
        let n: Vec<f64> = samples.iter().map(|c| c.w[0] * c.w[0]).collect();
        // Asymptotic critical value at α = 0.01.
        let critical = 1.628 / (samples.len() as f64).sqrt();
        assert!(ks_uniform(u, -1.0, 1.0) < critical);
        assert!(ks_uniform(n, 0.0, 1.0) < critical);
    }

    #[test]
    fn identical_values_form_one_flat_peak() {
        let p = detect_peaks(&[3.5e-4; 50]);
        assert_eq!(p.peaks.len(), 1);
        assert_eq!(p.peaks[0].width, 0.0);
        assert_eq!(p.peaks[0].count, 50);
    }

    #[test]
    fn short_inputs_are_a_single_peak() {
        assert!(detect_peaks(&[]).peaks.is_empty());
        let p = detect_peaks(&[1.0]);
        assert_eq!(
            p.peaks,
            vec![PeakStats {
                center: 1.0,
                width: 0.0,
                count: 1
            }]
        );
    }

    #[test]
    fn mixture_splits_into_two_ordered_peaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = normal_samples(&mut rng, 500, 9.50e-4, 9e-6);
        v.extend(normal_samples(&mut rng, 500, 5.96e-4, 3.4e-6));
        let p = detect_peaks(&v);
        assert_eq!(p.peaks.len(), 2);
        assert!((p.peaks[0].center / 5.96e-4 - 1.0).abs() < 0.01);
        assert!((p.peaks[1].center / 9.50e-4 - 1.0).abs() < 0.01);
        assert_eq!(p.peaks[0].count + p.peaks[1].count, 1000);
        assert_eq!(p.labels[0], 1);
        assert_eq!(p.labels[999], 0);
    }

    #[test]
    fn single_gaussian_is_one_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = normal_samples(&mut rng, 1000, 3.484e-4, 5e-6);
        assert_eq!(detect_peaks(&v).peaks.len(), 1);
    }

    #[test]
    fn small_outlier_group_is_not_a_peak() {
        let mut v = vec![1.0; 97];
        v.extend([5.0; 3]);
        assert_eq!(detect_peaks(&v).peaks.len(), 1);
    }

    #[test]
    fn histogram_counts_every_value() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let h = Histogram::build(&v, 10);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.counts.iter().sum::<usize>(), 101);
        assert_eq!(h.counts[9], 11);
        assert_eq!(h.edges[10], 100.0);
    }

    fn small_config(runs: usize) -> SurveyConfig {
        SurveyConfig {
            objective: ObjectiveSpec::new(GateId::T, ObjectiveKind::States(StateSetKind::Set3Grk)),
            runs,
            master_seed: 11,
            ..SurveyConfig::default()
        }
    }

    #[test]
    fn summary_bookkeeping() {
        let mut cfg = small_config(6);
        cfg.optimizer.max_iters = 30;
        let s = run_survey(&cfg).unwrap();
        assert_eq!(s.records.len(), 6);
        let included = s.included().count();
        assert_eq!(included + s.excluded.total(), 6);
        assert_eq!(
            s.objective_peaks.iter().map(|p| p.count).sum::<usize>(),
            included
        );
        let bundles = export_manifolds(&s);
        assert_eq!(bundles.len(), s.peak_count());
        for (b, p) in bundles.iter().zip(&s.objective_peaks) {
            assert_eq!(b.len(), p.count);
        }
    }

    #[test]
    fn max_iters_runs_are_tallied_not_counted() {
        let mut cfg = small_config(3);
        cfg.optimizer.max_iters = 1;
        let s = run_survey(&cfg).unwrap();
        assert_eq!(s.excluded.max_iters, 3);
        assert!(s.objective_peaks.is_empty());
        assert!(s.labels.iter().all(Option::is_none));
        assert!(export_manifolds(&s).is_empty());
    }

    #[test]
    fn one_run_gives_one_peak() {
        let s = run_survey(&small_config(1)).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.peak_count(), 1);
        assert_eq!(s.labels, vec![Some(0)]);
    }

    #[test]
    fn summary_independent_of_parallelism_field() {
        let mut a = small_config(2);
        a.optimizer.max_iters = 50;
        let mut b = a.clone();
        b.parallelism = 8;
        assert_eq!(run_survey(&a).unwrap(), run_survey(&b).unwrap());
    }

    #[test]
    fn cross_evaluation_onto_itself_is_identity() {
        let mut cfg = small_config(3);
        cfg.optimizer.max_iters = 200;
        let kind = ObjectiveKind::States(StateSetKind::Set3Grk);
        let (s, r) = cross_objective_experiment(&cfg, kind, kind).unwrap();
        let direct: Vec<f64> = s.included().map(|(_, rec, _)| rec.objective).collect();
        assert_eq!(r.substituted.len(), direct.len());
        for (a, b) in r.substituted.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn config_validation() {
        let ok = SurveyConfig::default();
        assert!(ok.validate().is_ok());
        let bad = [
            SurveyConfig {
                runs: 0,
                ..ok.clone()
            },
            SurveyConfig {
                histogram_bins: 1,
                ..ok.clone()
            },
            SurveyConfig {
                u_range: [1.0, -1.0],
                ..ok.clone()
            },
            SurveyConfig {
                n_range: [-0.5, 1.0],
                ..ok.clone()
            },
            SurveyConfig {
                parallelism: 0,
                ..ok.clone()
            },
            SurveyConfig {
                objective: ObjectiveSpec::new(GateId::T, ObjectiveKind::Frobenius),
                ..ok.clone()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
