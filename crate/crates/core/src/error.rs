use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid controls: {0}")]
    InvalidControls(&'static str),
    #[error("control vector has {found} intervals but the grid has {expected}")]
    ControlLength { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("rotation-family angle {0} is outside (-pi/2, pi/2]")]
    AngleOutOfRange(f64),
    #[error("the unital relation needs gamma = 0, got gamma = {0}")]
    NotUnital(f64),
    #[error("the Frobenius objective has no state set and no gradient")]
    NotStateObjective,
    #[error("state set is empty")]
    EmptyStateSet,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(&'static str),
    #[error("invalid survey configuration: {0}")]
    InvalidSurvey(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
