use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {what} = {got}, need at least {min}")]
    InvalidSize { what: &'static str, got: usize, min: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    /// A request exceeds a declared capability bound (exhaustive search cap,
    /// dense diagonalization cap, state-vector cap).
    #[error("{what}: L = {size} exceeds the cap of {cap}; {hint}")]
    Capability { what: &'static str, size: usize, cap: usize, hint: &'static str },

    #[error("{what} did not converge (residual {residual:.3e})")]
    Convergence { what: &'static str, residual: f64 },

    #[error("radial mode {mode} has negative squared frequency {eigenvalue:.3e}: zigzag instability")]
    ZigzagInstability { mode: usize, eigenvalue: f64 },

    #[error("mode {mode} is near resonance: |detuning| = {detuning:.3e} rad/s")]
    NearResonance { mode: usize, detuning: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("coupling matrix is identically zero")]
    ZeroMatrix,

    #[error("energy {energy} is outside the attainable range [{min}, {max})")]
    EnergyOutOfRange { energy: f64, min: f64, max: f64 },

    #[error("microcanonical window around E = {energy} is empty after widening")]
    EmptyWindow { energy: f64 },

    #[error("not enough data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("fit failed: {reason} (residual {residual:.3e})")]
    FitFailure { reason: &'static str, residual: f64 },

    #[error("ragged grid: {0}")]
    RaggedGrid(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
