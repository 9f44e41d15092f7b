//! Controlled Bloch-vector dynamics and piecewise-constant propagation.

use alloc::vec::Vec;

use nalgebra::{Complex, Matrix2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_exp, Mat3, Mat4, Vec3};

/// Above this 1-norm condition estimate `g = (e^{A dt} − I) A⁻¹ b` is
/// evaluated through the augmented exponential instead of the inverse.
pub const G_CONDITION_LIMIT: f64 = 1e8;

/// Physical constants of the qubit model (dimensionless).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Transition frequency.
    pub omega: f64,
    /// Dipole moment, strictly positive.
    pub mu: f64,
    /// Decoherence rate coefficient, nonnegative.
    pub gamma: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            mu: 0.1,
            gamma: 0.01,
        }
    }
}

impl SystemParams {
    pub fn new(omega: f64, mu: f64, gamma: f64) -> Result<Self> {
        let p = Self { omega, mu, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() {
            return Err(Error::InvalidParams("omega must be finite"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParams("mu must be finite and positive"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidParams("gamma must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Boundaries `0 = t_0 < t_1 < … < t_M = T` of the control intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct TimeGrid {
    boundaries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    boundaries: Vec<f64>,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        TimeGrid::from_boundaries(r.boundaries)
    }
}

impl From<TimeGrid> for GridRepr {
    fn from(g: TimeGrid) -> Self {
        GridRepr {
            boundaries: g.boundaries,
        }
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self::regular(5.0, 10).expect("default grid is valid")
    }
}

impl TimeGrid {
    /// `intervals` equal segments of `[0, horizon]`.
    pub fn regular(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid("horizon must be finite and positive"));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("at least one interval is required"));
        }
        let step = horizon / intervals as f64;
        let mut boundaries: Vec<f64> = (0..intervals).map(|k| k as f64 * step).collect();
        boundaries.push(horizon);
        Self::from_boundaries(boundaries)
    }

    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidGrid("at least two boundaries are required"));
        }
        if boundaries.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("boundaries must be finite"));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::InvalidGrid("the first boundary must be 0"));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("boundaries must be strictly increasing"));
        }
        Ok(Self { boundaries })
    }

    pub fn intervals(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Interval lengths `Δt_k`.
    pub fn durations(&self) -> impl Iterator<Item = f64> + '_ {
        self.boundaries.windows(2).map(|w| w[1] - w[0])
    }
}

/// Piecewise-constant controls: coherent amplitudes `u_k` and auxiliary
/// amplitudes `w_k` with incoherent control `n_k = w_k²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlVector {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl ControlVector {
    pub fn new(u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::InvalidControls("u and w must have equal length"));
        }
        Ok(Self { u, w })
    }

    /// Builds controls from `(u_k, n_k)` pairs, storing `w_k = +√n_k`.
    pub fn from_incoherent(u: Vec<f64>, n: &[f64]) -> Result<Self> {
        if n.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::InvalidControls(
                "incoherent control must be nonnegative",
            ));
        }
        Self::new(u, n.iter().map(|&v| libm::sqrt(v)).collect())
    }

    pub fn zeros(intervals: usize) -> Self {
        Self {
            u: alloc::vec![0.0; intervals],
            w: alloc::vec![0.0; intervals],
        }
    }

    pub fn intervals(&self) -> usize {
        self.u.len()
    }

    /// `n_k = w_k²`.
    pub fn incoherent(&self) -> Vec<f64> {
        self.w.iter().map(|w| w * w).collect()
    }

    /// Layout `u_1 … u_M, w_1 … w_M`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.u.clone();
        v.extend_from_slice(&self.w);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::InvalidControls(
                "flat control vector must have even length",
            ));
        }
        let (u, w) = v.split_at(v.len() / 2);
        Self::new(u.to_vec(), w.to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.w).all(|v| v.is_finite())
    }
}

/// Bloch vector `r` of a qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochState(pub Vec3);

impl From<[f64; 3]> for BlochState {
    fn from(v: [f64; 3]) -> Self {
        Self(Vec3::new(v[0], v[1], v[2]))
    }
}

impl From<BlochState> for [f64; 3] {
    fn from(s: BlochState) -> Self {
        [s.0[0], s.0[1], s.0[2]]
    }
}

impl BlochState {
    /// Slack allowed on `‖r‖ ≤ 1` for numerically propagated states.
    pub const NORM_SLACK: f64 = 1e-9;

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vec3::new(x, y, z))
    }

    pub fn ground() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn vector(&self) -> &Vec3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_physical(&self) -> bool {
        self.norm() <= 1.0 + Self::NORM_SLACK
    }
}

/// Four-component representation `q = (q_0, r)` with `q_0 = Tr ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedState(pub Vector4<f64>);

impl ExtendedState {
    pub fn from_bloch(r: &BlochState) -> Self {
        Self(Vector4::new(1.0, r.0[0], r.0[1], r.0[2]))
    }

    pub fn q0(&self) -> f64 {
        self.0[0]
    }

    pub fn bloch(&self) -> BlochState {
        BlochState::new(self.0[1], self.0[2], self.0[3])
    }
}

/// `A(u, n) = B + B^u u + B^n n` and the inhomogeneous term `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorMatrices {
    pub drift: Mat3,
    pub coherent: Mat3,
    pub incoherent: Mat3,
    pub offset: Vec3,
}

impl GeneratorMatrices {
    pub fn new(p: &SystemParams) -> Self {
        let (w, m, g) = (p.omega, p.mu, p.gamma);
        #[rustfmt::skip]
        let drift = Mat3::new(
            -g / 2.0, w,        0.0,
            -w,       -g / 2.0, 0.0,
            0.0,      0.0,      -g,
        );
        #[rustfmt::skip]
        let coherent = Mat3::new(
            0.0, 0.0,      0.0,
            0.0, 0.0,      -2.0 * m,
            0.0, 2.0 * m,  0.0,
        );
        let incoherent = Mat3::from_diagonal(&Vec3::new(-g, -g, -2.0 * g));
        Self {
            drift,
            coherent,
            incoherent,
            offset: Vec3::new(0.0, 0.0, g),
        }
    }

    pub fn a(&self, u: f64, n: f64) -> Mat3 {
        self.drift + self.coherent * u + self.incoherent * n
    }

    /// Homogeneous 4×4 generator `[[0, 0], [b, A]]`.
    pub fn c(&self, u: f64, n: f64) -> Mat4 {
        homogeneous(&self.a(u, n), &self.offset)
    }
}

fn homogeneous(a: &Mat3, b: &Vec3) -> Mat4 {
    let mut c = Mat4::zeros();
    c.fixed_view_mut::<3, 1>(1, 0).copy_from(b);
    c.fixed_view_mut::<3, 3>(1, 1).copy_from(a);
    c
}

pub fn build_generator_a(params: &SystemParams, u: f64, n: f64) -> Mat3 {
    GeneratorMatrices::new(params).a(u, n)
}

pub fn build_generator_c(params: &SystemParams, u: f64, n: f64) -> Mat4 {
    GeneratorMatrices::new(params).c(u, n)
}

/// Inverse of `a` if it is well enough conditioned for the closed-form `g`.
pub(crate) fn usable_inverse(a: &Mat3) -> Option<Mat3> {
    let inv = a.try_inverse()?;
    let cond = crate::linalg::norm1(a) * crate::linalg::norm1(&inv);
    (cond.is_finite() && cond < G_CONDITION_LIMIT).then_some(inv)
}

/// `∫₀^dt e^{A s} ds · b` through the augmented exponential
/// `exp([[A dt, b dt], [0, 0]])`.
pub(crate) fn g_augmented(a: &Mat3, b: &Vec3, dt: f64) -> Result<Vec3> {
    let mut z = Mat4::zeros();
    z.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a * dt));
    z.fixed_view_mut::<3, 1>(0, 3).copy_from(&(b * dt));
    let e = matrix_exp(&z)?;
    Ok(e.fixed_view::<3, 1>(0, 3).into_owned())
}

pub(crate) fn g_with(
    a: &Mat3,
    b: &Vec3,
    dt: f64,
    exp: &Mat3,
    inverse: Option<&Mat3>,
) -> Result<Vec3> {
    if b.iter().all(|v| *v == 0.0) {
        return Ok(Vec3::zeros());
    }
    match inverse {
        Some(inv) => Ok((exp - Mat3::identity()) * (inv * b)),
        None => g_augmented(a, b, dt),
    }
}

/// Affine part `g = (e^{A dt} − I) A⁻¹ b` of one interval's propagator.
pub fn compute_g(a: &Mat3, b: &Vec3, dt: f64) -> Result<Vec3> {
    let exp = matrix_exp(&(a * dt))?;
    g_with(a, b, dt, &exp, usable_inverse(a).as_ref())
}

/// Per-interval data: generator, propagator, affine term.
#[derive(Clone, Debug)]
pub(crate) struct IntervalStep {
    pub a: Mat3,
    pub exp: Mat3,
    pub inverse: Option<Mat3>,
    pub g: Vec3,
    pub dt: f64,
    pub w: f64,
}

/// Propagators of all intervals for one control vector. Built once and
/// reused for every initial state and for the gradient.
#[derive(Clone, Debug)]
pub struct PiecewiseEvolution {
    pub(crate) steps: Vec<IntervalStep>,
}

impl PiecewiseEvolution {
    pub fn new(
        gens: &GeneratorMatrices,
        grid: &TimeGrid,
        controls: &ControlVector,
    ) -> Result<Self> {
        check_controls(grid, controls)?;
        let mut steps = Vec::with_capacity(grid.intervals());
        for ((&u, &w), dt) in controls.u.iter().zip(&controls.w).zip(grid.durations()) {
            let a = gens.a(u, w * w);
            let exp = matrix_exp(&(a * dt))?;
            let inverse = usable_inverse(&a);
            let g = g_with(&a, &gens.offset, dt, &exp, inverse.as_ref())?;
            steps.push(IntervalStep {
                a,
                exp,
                inverse,
                g,
                dt,
                w,
            });
        }
        Ok(Self { steps })
    }

    pub fn intervals(&self) -> usize {
        self.steps.len()
    }

    /// `r_k = e^{A_k Δt_k} r_{k−1} + g_k` for every `k`, starting with `r_0`.
    pub fn states(&self, r0: &Vec3) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(*r0);
        let mut r = *r0;
        for s in &self.steps {
            r = s.exp * r + s.g;
            out.push(r);
        }
        out
    }

    pub fn final_state(&self, r0: &Vec3) -> Vec3 {
        self.steps.iter().fold(*r0, |r, s| s.exp * r + s.g)
    }
}

pub(crate) fn check_controls(grid: &TimeGrid, controls: &ControlVector) -> Result<()> {
    if controls.u.len() != grid.intervals() || controls.w.len() != grid.intervals() {
        return Err(Error::ControlLength {
            expected: grid.intervals(),
            found: controls.u.len().max(controls.w.len()),
        });
    }
    if !controls.is_finite() {
        return Err(Error::NonFinite("controls"));
    }
    Ok(())
}

/// The full state sequence `r_0, r_1, …, r_M`.
pub fn propagate_state(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    r0: &BlochState,
) -> Result<Vec<BlochState>> {
    let evo = PiecewiseEvolution::new(&GeneratorMatrices::new(params), grid, controls)?;
    Ok(evo.states(&r0.0).into_iter().map(BlochState).collect())
}

/// 4×4 matrix `Ψ` of the dynamical map in the `σ_i/2` basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct EvolutionMatrix(pub Mat4);

impl From<[[f64; 4]; 4]> for EvolutionMatrix {
    fn from(rows: [[f64; 4]; 4]) -> Self {
        Self(Mat4::from_fn(|i, j| rows[i][j]))
    }
}

impl From<EvolutionMatrix> for [[f64; 4]; 4] {
    fn from(m: EvolutionMatrix) -> Self {
        core::array::from_fn(|i| core::array::from_fn(|j| m.0[(i, j)]))
    }
}

impl EvolutionMatrix {
    pub fn identity() -> Self {
        Self(Mat4::identity())
    }

    /// Assembles `[[1, 0], [translation, linear]]`.
    pub fn from_blocks(translation: &Vec3, linear: &Mat3) -> Self {
        let mut m = homogeneous(linear, translation);
        m[(0, 0)] = 1.0;
        Self(m)
    }

    /// `Ψ′`, the translation applied to Bloch vectors.
    pub fn translation(&self) -> Vec3 {
        self.0.fixed_view::<3, 1>(1, 0).into_owned()
    }

    /// `Ψ″`, the linear part acting on Bloch vectors.
    pub fn linear(&self) -> Mat3 {
        self.0.fixed_view::<3, 3>(1, 1).into_owned()
    }

    pub fn apply(&self, q: &ExtendedState) -> ExtendedState {
        ExtendedState(self.0 * q.0)
    }

    /// `Ψ″ r + Ψ′`.
    pub fn apply_bloch(&self, r: &BlochState) -> BlochState {
        BlochState(self.linear() * r.0 + self.translation())
    }

    /// Largest deviation of the first row from `(1, 0, 0, 0)`.
    pub fn first_row_deviation(&self) -> f64 {
        let row = self.0.row(0);
        (0..4)
            .map(|j| (row[j] - if j == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// `Ψ(T) = e^{C_M Δt_M} ⋯ e^{C_1 Δt_1}` from 4×4 exponentials.
pub fn propagate_evolution_matrix(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
) -> Result<EvolutionMatrix> {
    check_controls(grid, controls)?;
    let gens = GeneratorMatrices::new(params);
    let mut psi = Mat4::identity();
    for ((&u, &w), dt) in controls.u.iter().zip(&controls.w).zip(grid.durations()) {
        psi = matrix_exp(&(gens.c(u, w * w) * dt))? * psi;
    }
    Ok(EvolutionMatrix(psi))
}

pub type Complex2 = Matrix2<Complex<f64>>;

const HERMITIAN_TOL: f64 = 1e-12;

fn pauli() -> [Complex2; 4] {
    let z = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    let i = Complex::new(0.0, 1.0);
    [
        Complex2::new(one, z, z, one),
        Complex2::new(z, one, one, z),
        Complex2::new(z, -i, i, z),
        Complex2::new(one, z, z, -one),
    ]
}

/// `q_i = Tr(ρ σ_i)` for a Hermitian 2×2 matrix, so that `ρ = ½ Σ q_i σ_i`.
pub fn hermitian_to_extended(rho: &Complex2) -> Result<ExtendedState> {
    if rho.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("density matrix"));
    }
    let dev = (rho - rho.adjoint())
        .iter()
        .map(|c| c.norm_sqr())
        .fold(0.0, f64::max);
    if dev > HERMITIAN_TOL * HERMITIAN_TOL {
        return Err(Error::NotHermitian);
    }
    let s = pauli();
    Ok(ExtendedState(Vector4::from_fn(|i, _| {
        (rho * s[i]).trace().re
    })))
}

pub fn extended_to_hermitian(q: &ExtendedState) -> Complex2 {
    let s = pauli();
    (0..4).fold(Complex2::zeros(), |acc, i| {
        acc + s[i] * Complex::new(q.0[i] / 2.0, 0.0)
    })
}

/// `r_j = Tr(ρ σ_j)`.
pub fn density_to_bloch(rho: &Complex2) -> Result<BlochState> {
    Ok(hermitian_to_extended(rho)?.bloch())
}

/// `ρ = ½ (I + Σ r_j σ_j)`.
pub fn bloch_to_density(r: &BlochState) -> Complex2 {
    extended_to_hermitian(&ExtendedState::from_bloch(r))
}
