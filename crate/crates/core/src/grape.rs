//! Exact-gradient GRAPE descent for the state objectives.
//!
//! The gradient of `F = (1/2K) Σ_j ‖r_j(T) − r_U^{(j)}‖²` with respect to
//! `v = (u_1…u_M, w_1…w_M)` is assembled from the stored intermediate states
//! and the per-interval derivatives of `e^{A_k Δt_k}` and `g_k`:
//!
//! ```text
//! ∂r(T)/∂v_k = e^{A_M Δt_M} ⋯ e^{A_{k+1} Δt_{k+1}} [∂e^{A_k Δt_k}/∂v_k · r_{k−1} + ∂g_k/∂v_k]
//! ```
//!
//! The products over later intervals are accumulated backwards as a
//! co-state, so one pass per initial state gives all 2M components.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlVector, IntervalStep};
use crate::error::{Error, Result};
use crate::linalg::{exp_frechet_3, exp_frechet_4, matrix_exp, Mat3, Mat4, Vec3};
use crate::objectives::GateProblem;
use crate::serde_util::nullable_f64;

/// When a run counts as stuck.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StuckRule {
    /// Stop once `L_stuck` trial steps have been rejected over the run.
    #[default]
    Total,
    /// Stop once `L_stuck` trial steps in a row have been rejected.
    Consecutive,
}

/// How `∫₀^Δt e^{At} X e^{A(Δt−t)} dt` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeRule {
    /// Trapezoidal rule with `N_partition` panels.
    #[default]
    Trapezoid,
    /// Block-triangular exponential (no quadrature error).
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Stop once the objective drops below this value.
    pub eps: f64,
    /// Initial step length.
    pub h0: f64,
    /// Step growth factor after an accepted step.
    #[serde(rename = "c")]
    pub grow: f64,
    /// Step shrink factor after a rejected step.
    #[serde(rename = "d")]
    pub shrink: f64,
    #[serde(rename = "L_stuck")]
    pub stuck_limit: usize,
    #[serde(rename = "N_partition")]
    pub n_partition: usize,
    /// Cap on trial steps (accepted plus rejected).
    pub max_iters: usize,
    pub stuck_rule: StuckRule,
    pub derivative: DerivativeRule,
    /// Keep the accepted objective values in the run record.
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            h0: 1.0,
            grow: 1.1,
            shrink: 0.5,
            stuck_limit: 20,
            n_partition: 20,
            max_iters: 10_000,
            stuck_rule: StuckRule::Total,
            derivative: DerivativeRule::Trapezoid,
            record_trace: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidOptimizer("eps must be positive"));
        }
        if !(self.h0.is_finite() && self.h0 > 0.0) {
            return Err(Error::InvalidOptimizer("h0 must be finite and positive"));
        }
        if !(self.grow.is_finite() && self.grow > 1.0) {
            return Err(Error::InvalidOptimizer("c must exceed 1"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidOptimizer("d must lie in (0, 1)"));
        }
        if self.stuck_limit == 0 {
            return Err(Error::InvalidOptimizer("L_stuck must be at least 1"));
        }
        if self.n_partition < 2 {
            return Err(Error::InvalidOptimizer("N_partition must be at least 2"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidOptimizer("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Converged,
    Stuck,
    MaxIters,
    /// The objective or gradient became NaN or infinite.
    NonFinite,
}

impl Termination {
    /// Converged and stuck runs are the ones that enter the statistics.
    pub fn is_normal(self) -> bool {
        matches!(self, Termination::Converged | Termination::Stuck)
    }
}

/// Outcome of one descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub termination: Termination,
    /// Accepted steps.
    pub iterations: usize,
    pub rejections: usize,
    #[serde(with = "nullable_f64")]
    pub initial_objective: f64,
    #[serde(with = "nullable_f64")]
    pub objective: f64,
    /// `F_U` of the final controls.
    #[serde(with = "nullable_f64")]
    pub frobenius: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub u0: Vec<f64>,
    pub w0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl RunRecord {
    pub fn final_controls(&self) -> ControlVector {
        ControlVector {
            u: self.u.clone(),
            w: self.w.clone(),
        }
    }

    pub fn initial_controls(&self) -> ControlVector {
        ControlVector {
            u: self.u0.clone(),
            w: self.w0.clone(),
        }
    }
}

/// Trapezoidal `∫₀^dt e^{A t} X e^{A (dt − t)} dt` with `panels` panels,
/// both endpoints included.
pub fn exp_derivative_trapezoid(a: &Mat3, x: &Mat3, dt: f64, panels: usize) -> Result<Mat3> {
    let powers = exp_powers(a, dt, panels)?;
    Ok(trapezoid_with(&powers, x, dt))
}

/// `e^{A i h}` for `i = 0..=panels`, `h = dt / panels`.
fn exp_powers(a: &Mat3, dt: f64, panels: usize) -> Result<Vec<Mat3>> {
    let step = matrix_exp(&(a * (dt / panels as f64)))?;
    let mut powers = Vec::with_capacity(panels + 1);
    powers.push(Mat3::identity());
    for i in 0..panels {
        powers.push(step * powers[i]);
    }
    Ok(powers)
}

fn trapezoid_with(powers: &[Mat3], x: &Mat3, dt: f64) -> Mat3 {
    let n = powers.len() - 1;
    let h = dt / n as f64;
    let mut acc = Mat3::zeros();
    for i in 0..=n {
        let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += (powers[i] * x * powers[n - i]) * weight;
    }
    acc * h
}

/// `∂e^{A Δt}/∂u = ∫₀^Δt e^{At} B^u e^{A(Δt−t)} dt`, trapezoidal.
pub fn d_exp_du(a: &Mat3, bu: &Mat3, dt: f64, panels: usize) -> Result<Mat3> {
    exp_derivative_trapezoid(a, bu, dt, panels)
}

/// `∂e^{A Δt}/∂w = 2w ∫₀^Δt e^{At} B^n e^{A(Δt−t)} dt`, trapezoidal.
pub fn d_exp_dw(a: &Mat3, bn: &Mat3, w: f64, dt: f64, panels: usize) -> Result<Mat3> {
    Ok(exp_derivative_trapezoid(a, bn, dt, panels)? * (2.0 * w))
}

/// `∂g/∂x = (∂e^{AΔt}/∂x − s·(e^{AΔt} − I) A⁻¹ B^x) A⁻¹ b` where `s` is the
/// chain-rule factor of the control (1 for `u`, `2w` for `w`).
pub fn d_g(a: &Mat3, b: &Vec3, bx: &Mat3, dt: f64, d_exp: &Mat3, scale: f64) -> Result<Vec3> {
    let exp = matrix_exp(&(a * dt))?;
    d_g_with(
        a,
        b,
        bx,
        dt,
        &exp,
        crate::dynamics::usable_inverse(a).as_ref(),
        d_exp,
        scale,
    )
}

#[allow(clippy::too_many_arguments)]
fn d_g_with(
    a: &Mat3,
    b: &Vec3,
    bx: &Mat3,
    dt: f64,
    exp: &Mat3,
    inverse: Option<&Mat3>,
    d_exp: &Mat3,
    scale: f64,
) -> Result<Vec3> {
    if scale == 0.0 || b.iter().all(|v| *v == 0.0) {
        return Ok(Vec3::zeros());
    }
    match inverse {
        Some(inv) => {
            let inv_b = inv * b;
            Ok(d_exp * inv_b - (exp - Mat3::identity()) * (inv * (bx * inv_b)) * scale)
        }
        None => {
            // Differentiate the augmented exponential exp([[A, b], [0, 0]] dt).
            let mut z = Mat4::zeros();
            z.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
            z.fixed_view_mut::<3, 1>(0, 3).copy_from(b);
            let mut dz = Mat4::zeros();
            dz.fixed_view_mut::<3, 3>(0, 0).copy_from(&(bx * scale));
            let d = exp_frechet_4(&z, &dz, dt)?;
            Ok(d.fixed_view::<3, 1>(0, 3).into_owned())
        }
    }
}

/// Derivatives of one interval's propagator and affine term.
struct IntervalDerivative {
    exp_u: Mat3,
    exp_w: Mat3,
    g_u: Vec3,
    g_w: Vec3,
}

fn interval_derivative(
    problem: &GateProblem,
    step: &IntervalStep,
    config: &OptimizerConfig,
) -> Result<IntervalDerivative> {
    let gens = &problem.generators;
    let (int_u, int_n) = match config.derivative {
        DerivativeRule::Trapezoid => {
            let powers = exp_powers(&step.a, step.dt, config.n_partition)?;
            (
                trapezoid_with(&powers, &gens.coherent, step.dt),
                trapezoid_with(&powers, &gens.incoherent, step.dt),
            )
        }
        DerivativeRule::Exact => (
            exp_frechet_3(&step.a, &gens.coherent, step.dt)?,
            exp_frechet_3(&step.a, &gens.incoherent, step.dt)?,
        ),
    };
    let w_scale = 2.0 * step.w;
    let exp_w = int_n * w_scale;
    let inv = step.inverse.as_ref();
    let g_u = d_g_with(
        &step.a,
        &gens.offset,
        &gens.coherent,
        step.dt,
        &step.exp,
        inv,
        &int_u,
        1.0,
    )?;
    let g_w = d_g_with(
        &step.a,
        &gens.offset,
        &gens.incoherent,
        step.dt,
        &step.exp,
        inv,
        &exp_w,
        w_scale,
    )?;
    Ok(IntervalDerivative {
        exp_u: int_u,
        exp_w,
        g_u,
        g_w,
    })
}

/// Analytic gradient of the state objective, laid out as `u_1…u_M, w_1…w_M`.
pub fn gradient(
    problem: &GateProblem,
    controls: &ControlVector,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let evo = problem.evolution(controls)?;
    gradient_from(problem, &evo.steps, config)
}

fn gradient_from(
    problem: &GateProblem,
    steps: &[IntervalStep],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let m = steps.len();
    let derivs = steps
        .iter()
        .map(|s| interval_derivative(problem, s, config))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; 2 * m];
    let mut states = Vec::with_capacity(m + 1);
    for (r0, target) in problem.states.states().iter().zip(&problem.targets) {
        states.clear();
        states.push(r0.0);
        for s in steps {
            let r = s.exp * states[states.len() - 1] + s.g;
            states.push(r);
        }
        let mut costate = states[m] - target;
        for k in (0..m).rev() {
            let d = &derivs[k];
            grad[k] += costate.dot(&(d.exp_u * states[k] + d.g_u));
            grad[m + k] += costate.dot(&(d.exp_w * states[k] + d.g_w));
            costate = steps[k].exp.tr_mul(&costate);
        }
    }
    let k = problem.states.len() as f64;
    for g in &mut grad {
        *g /= k;
    }
    Ok(grad)
}

/// Gradient descent with the accept/reject step-length scheme: a trial step
/// `v − h·∇F` is accepted only if it lowers `F`, after which `h ← c·h`;
/// otherwise `h ← d·h` and the rejection counts toward `L_stuck`.
pub fn descend(
    problem: &GateProblem,
    init: &ControlVector,
    config: &OptimizerConfig,
) -> Result<RunRecord> {
    config.validate()?;
    crate::dynamics::check_controls(&problem.grid, init)?;

    let mut v = init.to_flat();
    let mut f = problem.objective(init)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("initial objective"));
    }
    let initial_objective = f;
    let mut trace = config.record_trace.then(|| vec![f]);
    let mut h = config.h0;
    let (mut accepted, mut rejected, mut streak) = (0usize, 0usize, 0usize);
    let mut grad: Option<Vec<f64>> = None;
    let mut current = Some(problem.evolution(init)?);

    let termination = loop {
        if f < config.eps {
            break Termination::Converged;
        }
        if accepted + rejected >= config.max_iters {
            break Termination::MaxIters;
        }
        if grad.is_none() {
            let evo = match current.take() {
                Some(evo) => evo,
                None => problem.evolution(&ControlVector::from_flat(&v)?)?,
            };
            let g = gradient_from(problem, &evo.steps, config)?;
            if g.iter().any(|x| !x.is_finite()) {
                break Termination::NonFinite;
            }
            grad = Some(g);
        }
        let g = grad.as_deref().unwrap_or_default();
        let trial: Vec<f64> = v.iter().zip(g).map(|(x, d)| x - h * d).collect();
        let trial_controls = ControlVector::from_flat(&trial)?;
        let (f_trial, trial_evo) = match problem.evolution(&trial_controls) {
            Ok(evo) => (problem.objective_from(&evo), Some(evo)),
            Err(Error::NonFinite(_)) => (f64::NAN, None),
            Err(e) => return Err(e),
        };
        if f_trial < f {
            v = trial;
            f = f_trial;
            grad = None;
            current = trial_evo;
            h *= config.grow;
            accepted += 1;
            streak = 0;
            if let Some(t) = trace.as_mut() {
                t.push(f);
            }
        } else {
            h *= config.shrink;
            rejected += 1;
            streak += 1;
            let count = match config.stuck_rule {
                StuckRule::Total => rejected,
                StuckRule::Consecutive => streak,
            };
            if count >= config.stuck_limit {
                break Termination::Stuck;
            }
        }
    };

    let final_controls = ControlVector::from_flat(&v)?;
    let frobenius = problem.frobenius(&final_controls).unwrap_or(f64::NAN);
    Ok(RunRecord {
        seed: 0,
        termination,
        iterations: accepted,
        rejections: rejected,
        initial_objective,
        objective: f,
        frobenius,
        u: final_controls.u,
        w: final_controls.w,
        u0: init.u.clone(),
        w0: init.w.clone(),
        trace,
    })
}
