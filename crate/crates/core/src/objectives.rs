//! Target gates, initial-state sets and the gate-generation objectives.
//!
//! All objectives are evaluated in real Bloch coordinates. A density-matrix
//! distance `‖ρ − σ‖²` (Hilbert–Schmidt) equals `½‖r_ρ − r_σ‖²`, so the
//! state objective is `(1/2K) Σ_j ‖r_j(T) − R_U r_j(0)‖²` and the Frobenius
//! objective is `‖Ψ(T) − Ψ_U‖²`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use core::fmt;
use core::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    bloch_to_density, propagate_evolution_matrix, BlochState, Complex2, ControlVector,
    EvolutionMatrix, GeneratorMatrices, PiecewiseEvolution, SystemParams, TimeGrid,
};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

/// Identifier of a target gate: `H`, `T`, `rotation:<theta>` or
/// `phase:<delta>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GateId {
    Hadamard,
    T,
    Rotation(f64),
    Phase(f64),
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateId::Hadamard => f.write_str("H"),
            GateId::T => f.write_str("T"),
            GateId::Rotation(t) => write!(f, "rotation:{t}"),
            GateId::Phase(d) => write!(f, "phase:{d}"),
        }
    }
}

impl FromStr for GateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownIdentifier(s.to_string());
        match s {
            "H" => Ok(GateId::Hadamard),
            "T" => Ok(GateId::T),
            _ => {
                let (kind, value) = s.split_once(':').ok_or_else(unknown)?;
                let value: f64 = value.trim().parse().map_err(|_| unknown())?;
                match kind {
                    "rotation" => Ok(GateId::Rotation(value)),
                    "phase" => Ok(GateId::Phase(value)),
                    _ => Err(unknown()),
                }
            }
        }
    }
}

impl TryFrom<String> for GateId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GateId> for String {
    fn from(g: GateId) -> Self {
        g.to_string()
    }
}

/// A unitary target gate together with its induced rotation of the Bloch
/// ball. Objectives only see the rotation, so global phases are irrelevant.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    id: GateId,
    unitary: Complex2,
    rotation: Mat3,
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn pauli_xyz() -> [Complex2; 3] {
    let (z, one, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [
        Complex2::new(z, one, one, z),
        Complex2::new(z, -i, i, z),
        Complex2::new(one, z, z, -one),
    ]
}

/// `R_ij = ½ Tr(σ_i U σ_j U†)`.
fn induced_rotation(u: &Complex2) -> Mat3 {
    let s = pauli_xyz();
    let ud = u.adjoint();
    Mat3::from_fn(|i, j| 0.5 * (s[i] * u * s[j] * ud).trace().re)
}

impl Gate {
    pub fn from_unitary(id: GateId, unitary: Complex2) -> Self {
        Self {
            id,
            rotation: induced_rotation(&unitary),
            unitary,
        }
    }

    pub fn hadamard() -> Self {
        let h = c(FRAC_1_SQRT_2, 0.0);
        Self::from_unitary(GateId::Hadamard, Complex2::new(h, h, h, -h))
    }

    pub fn t() -> Self {
        let mut g = Self::phase_shift(FRAC_PI_4);
        g.id = GateId::T;
        g
    }

    /// `diag(1, e^{iδ})`.
    pub fn phase_shift(delta: f64) -> Self {
        let u = Complex2::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(libm::cos(delta), libm::sin(delta)),
        );
        Self::from_unitary(GateId::Phase(delta), u)
    }

    /// Rotation about `(cos θ/√2, sin θ, cos θ/√2)` by `2 arctan(1/sin θ)`:
    /// the one-parameter family acting on `|0⟩⟨0|` and `|1⟩⟨1|` exactly as
    /// the Hadamard gate.
    pub fn rotation_family(theta: f64) -> Result<Self> {
        if !(theta > -FRAC_PI_2 && theta <= FRAC_PI_2) {
            return Err(Error::AngleOutOfRange(theta));
        }
        let (s, ct) = (libm::sin(theta), libm::cos(theta));
        // arctan(1/sin θ) → π/2 as θ → 0, which atan(±inf) already yields.
        let half_angle = libm::atan(1.0 / s);
        let axis = [ct * FRAC_1_SQRT_2, s, ct * FRAC_1_SQRT_2];
        let p = pauli_xyz();
        let n_sigma = (0..3).fold(Complex2::zeros(), |acc, k| acc + p[k] * c(axis[k], 0.0));
        let u = Complex2::identity() * c(libm::cos(half_angle), 0.0)
            - n_sigma * c(0.0, libm::sin(half_angle));
        Ok(Self::from_unitary(GateId::Rotation(theta), u))
    }

    pub fn from_id(id: &GateId) -> Result<Self> {
        match *id {
            GateId::Hadamard => Ok(Self::hadamard()),
            GateId::T => Ok(Self::t()),
            GateId::Rotation(t) => Self::rotation_family(t),
            GateId::Phase(d) => Ok(Self::phase_shift(d)),
        }
    }

    pub fn id(&self) -> GateId {
        self.id
    }

    pub fn unitary(&self) -> &Complex2 {
        &self.unitary
    }

    /// The 3×3 rotation `Ψ_U″`.
    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    /// `Ψ_U`: no translation, rotation block `Ψ_U″`.
    pub fn evolution_matrix(&self) -> EvolutionMatrix {
        EvolutionMatrix::from_blocks(&Vec3::zeros(), &self.rotation)
    }

    /// Bloch vector of `U ρ U†`.
    pub fn image(&self, r: &BlochState) -> BlochState {
        BlochState(self.rotation * r.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSetKind {
    /// `|0⟩, |1⟩`.
    #[serde(rename = "set2")]
    Set2,
    /// The three mixed states `diag(2/3, 1/3)`, `|+⟩⟨+|`, `I/2`.
    #[serde(rename = "set3-grk")]
    Set3Grk,
    /// `|0⟩, |1⟩, |+⟩, |i⟩`.
    #[serde(rename = "set4")]
    Set4,
    /// Anything else, e.g. the standard basis of R³.
    #[serde(rename = "custom")]
    Custom,
}

impl StateSetKind {
    pub fn identifier(self) -> &'static str {
        match self {
            StateSetKind::Set2 => "set2",
            StateSetKind::Set3Grk => "set3-grk",
            StateSetKind::Set4 => "set4",
            StateSetKind::Custom => "custom",
        }
    }
}

/// Initial states of a state objective, as Bloch vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet {
    kind: StateSetKind,
    states: Vec<BlochState>,
}

impl StateSet {
    pub fn of(kind: StateSetKind) -> Self {
        let b = BlochState::new;
        let states = match kind {
            StateSetKind::Set2 => alloc::vec![b(0.0, 0.0, 1.0), b(0.0, 0.0, -1.0)],
            StateSetKind::Set3Grk => {
                alloc::vec![b(0.0, 0.0, 1.0 / 3.0), b(1.0, 0.0, 0.0), b(0.0, 0.0, 0.0)]
            }
            StateSetKind::Set4 => alloc::vec![
                b(0.0, 0.0, 1.0),
                b(0.0, 0.0, -1.0),
                b(1.0, 0.0, 0.0),
                b(0.0, 1.0, 0.0)
            ],
            StateSetKind::Custom => Vec::new(),
        };
        Self { kind, states }
    }

    pub fn custom(states: Vec<BlochState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyStateSet);
        }
        Ok(Self {
            kind: StateSetKind::Custom,
            states,
        })
    }

    /// Bloch vectors `(1,0,0), (0,1,0), (0,0,1)`.
    pub fn standard_basis() -> Self {
        Self {
            kind: StateSetKind::Custom,
            states: alloc::vec![
                BlochState::new(1.0, 0.0, 0.0),
                BlochState::new(0.0, 1.0, 0.0),
                BlochState::new(0.0, 0.0, 1.0)
            ],
        }
    }

    pub fn kind(&self) -> StateSetKind {
        self.kind
    }

    pub fn states(&self) -> &[BlochState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn density_matrices(&self) -> Vec<Complex2> {
        self.states.iter().map(bloch_to_density).collect()
    }
}

/// `set2`, `set3-grk`, `set4` or `frobenius`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObjectiveKind {
    States(StateSetKind),
    Frobenius,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::States(k) => f.write_str(k.identifier()),
            ObjectiveKind::Frobenius => f.write_str("frobenius"),
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "set2" => Ok(Self::States(StateSetKind::Set2)),
            "set3-grk" => Ok(Self::States(StateSetKind::Set3Grk)),
            "set4" => Ok(Self::States(StateSetKind::Set4)),
            "frobenius" => Ok(Self::Frobenius),
            _ => Err(Error::UnknownIdentifier(s.to_string())),
        }
    }
}

impl TryFrom<String> for ObjectiveKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ObjectiveKind> for String {
    fn from(k: ObjectiveKind) -> Self {
        k.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub gate: GateId,
    pub kind: ObjectiveKind,
}

impl ObjectiveSpec {
    pub fn new(gate: GateId, kind: ObjectiveKind) -> Self {
        Self { gate, kind }
    }

    /// Short label such as `F_{T,3}` or `F_H`.
    pub fn label(&self) -> String {
        let k = match self.kind {
            ObjectiveKind::States(StateSetKind::Set2) => ",2",
            ObjectiveKind::States(StateSetKind::Set3Grk) => ",3",
            ObjectiveKind::States(StateSetKind::Set4) => ",4",
            ObjectiveKind::States(StateSetKind::Custom) => ",K",
            ObjectiveKind::Frobenius => "",
        };
        format!("F_{{{}{}}}", self.gate, k)
    }
}

/// A state objective ready for repeated evaluation: generators and target
/// Bloch vectors are computed once.
#[derive(Clone, Debug)]
pub struct GateProblem {
    pub(crate) params: SystemParams,
    pub(crate) grid: TimeGrid,
    pub(crate) generators: GeneratorMatrices,
    pub(crate) gate: Gate,
    pub(crate) states: StateSet,
    pub(crate) targets: Vec<Vec3>,
}

impl GateProblem {
    pub fn new(params: SystemParams, grid: TimeGrid, gate: Gate, states: StateSet) -> Result<Self> {
        params.validate()?;
        if states.is_empty() {
            return Err(Error::EmptyStateSet);
        }
        let targets = states.states().iter().map(|r| gate.image(r).0).collect();
        Ok(Self {
            generators: GeneratorMatrices::new(&params),
            params,
            grid,
            gate,
            states,
            targets,
        })
    }

    pub fn from_spec(params: SystemParams, grid: TimeGrid, spec: &ObjectiveSpec) -> Result<Self> {
        match spec.kind {
            ObjectiveKind::States(kind) => {
                Self::new(params, grid, Gate::from_id(&spec.gate)?, StateSet::of(kind))
            }
            ObjectiveKind::Frobenius => Err(Error::NotStateObjective),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gate(&self) -> &Gate {
        &self.gate
    }

    pub fn states(&self) -> &StateSet {
        &self.states
    }

    /// Target Bloch vectors `r_U^{(j)}`.
    pub fn targets(&self) -> &[Vec3] {
        &self.targets
    }

    pub fn evolution(&self, controls: &ControlVector) -> Result<PiecewiseEvolution> {
        PiecewiseEvolution::new(&self.generators, &self.grid, controls)
    }

    /// Objective value for already-built propagators.
    pub fn objective_from(&self, evo: &PiecewiseEvolution) -> f64 {
        let sum: f64 = self
            .states
            .states()
            .iter()
            .zip(&self.targets)
            .map(|(r0, target)| (evo.final_state(&r0.0) - target).norm_squared())
            .sum();
        sum / (2.0 * self.states.len() as f64)
    }

    pub fn objective(&self, controls: &ControlVector) -> Result<f64> {
        Ok(self.objective_from(&self.evolution(controls)?))
    }

    /// `F_U` for the same gate.
    pub fn frobenius(&self, controls: &ControlVector) -> Result<f64> {
        objective_frobenius(&self.params, &self.grid, controls, &self.gate)
    }
}

/// `F_{U,K} = (1/2K) Σ_j ‖r_j(T) − r_U^{(j)}‖²`.
pub fn objective_states(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    gate: &Gate,
    states: &StateSet,
) -> Result<f64> {
    GateProblem::new(*params, grid.clone(), gate.clone(), states.clone())?.objective(controls)
}

/// `F_U = ‖Ψ(T) − Ψ_U‖²` (squared Frobenius norm).
pub fn objective_frobenius(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    gate: &Gate,
) -> Result<f64> {
    let psi = propagate_evolution_matrix(params, grid, controls)?;
    Ok((psi.0 - gate.evolution_matrix().0).norm_squared())
}

/// Both sides of `F_U = 6 F_{U,3}` for the standard-basis state set; the
/// identity holds for unital evolutions, i.e. `γ = 0`.
pub fn check_unital_relation(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    gate: &Gate,
) -> Result<(f64, f64)> {
    if params.gamma != 0.0 {
        return Err(Error::NotUnital(params.gamma));
    }
    let frob = objective_frobenius(params, grid, controls, gate)?;
    let states = objective_states(params, grid, controls, gate, &StateSet::standard_basis())?;
    Ok((frob, 6.0 * states))
}

/// Value of `to` at the given controls (typically optimized for a different
/// objective).
pub fn cross_evaluate(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    to: &ObjectiveSpec,
) -> Result<f64> {
    let gate = Gate::from_id(&to.gate)?;
    match to.kind {
        ObjectiveKind::States(kind) => {
            objective_states(params, grid, controls, &gate, &StateSet::of(kind))
        }
        ObjectiveKind::Frobenius => objective_frobenius(params, grid, controls, &gate),
    }
}

/// Splits `F_{U,4}` into `½ F_{U,2}` and the mean squared distance over the
/// `|+⟩` and `|i⟩` states (the remainder). The two parts sum to `F_{U,4}`.
pub fn set4_decomposition(
    params: &SystemParams,
    grid: &TimeGrid,
    controls: &ControlVector,
    gate: &Gate,
) -> Result<(f64, f64)> {
    let half_f2 = 0.5
        * objective_states(
            params,
            grid,
            controls,
            gate,
            &StateSet::of(StateSetKind::Set2),
        )?;
    let plus_i = StateSet::custom(StateSet::of(StateSetKind::Set4).states()[2..].to_vec())?;
    // (1/4)·Σ‖Δρ‖² over two states = (1/8)·Σ‖Δr‖² = ½·F over that pair.
    let remainder = 0.5 * objective_states(params, grid, controls, gate, &plus_i)?;
    Ok((half_f2, remainder))
}
