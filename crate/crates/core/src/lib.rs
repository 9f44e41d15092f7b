//! Numerical core for gate generation on an open qubit driven by coherent and
//! incoherent (environment) controls.
//!
//! The qubit evolves under a GKSL master equation whose Bloch-vector form is
//! affine, `dr/dt = A(u, n) r + b`. Controls are piecewise constant on a time
//! grid, so every propagator is a small matrix exponential. On top of the
//! propagation layer sit the gate objectives, exact-gradient GRAPE descent,
//! and the multi-start landscape statistics (histograms, peak detection,
//! control manifolds).
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the command line
//! and the thread-parallel survey runner live in the `qlandscape` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod grape;
pub mod linalg;
pub mod objectives;
mod serde_util;
pub mod survey;

pub use crate::dynamics::{
    bloch_to_density, build_generator_a, build_generator_c, compute_g, density_to_bloch,
    extended_to_hermitian, hermitian_to_extended, propagate_evolution_matrix, propagate_state,
    BlochState, ControlVector, EvolutionMatrix, ExtendedState, GeneratorMatrices,
    PiecewiseEvolution, SystemParams, TimeGrid,
};
pub use crate::error::{Error, Result};
pub use crate::grape::{
    d_exp_du, d_exp_dw, d_g, descend, gradient, DerivativeRule, OptimizerConfig, RunRecord,
    StuckRule, Termination,
};
pub use crate::linalg::matrix_exp;
pub use crate::objectives::{
    check_unital_relation, cross_evaluate, objective_frobenius, objective_states,
    set4_decomposition, Gate, GateId, GateProblem, ObjectiveKind, ObjectiveSpec, StateSet,
    StateSetKind,
};
pub use crate::survey::{
    cross_evaluate_summary, cross_objective_experiment, detect_peaks, export_manifolds, run_one,
    run_survey, sample_initial, summarize, CrossObjectiveReport, ExclusionTally, Histogram,
    ManifoldBundle, PeakStats, Peaks, SurveyConfig, SurveySummary,
};
