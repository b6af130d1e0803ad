//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("boundary patch `{0}` is empty")]
    PatchEmpty(&'static str),

    #[error("the shell between the inner region and the boundary is not edge-connected")]
    ShellDisconnected,

    #[error("inner region violates the two-cell margin to the boundary (min distance {found:.3e}, required {required:.3e})")]
    MarginViolated { found: f64, required: f64 },

    #[error("field shape mismatch: expected {expected} values for {support}, got {got}")]
    ShapeMismatch {
        expected: usize,
        got: usize,
        support: &'static str,
    },

    #[error("unsupported Sobolev exponent {0}")]
    UnsupportedExponent(f64),

    #[error("frequency {eta:?} is not on the dual lattice (spacing {spacing:.6e})")]
    OffLattice { eta: [f64; 3], spacing: f64 },

    #[error("potential exceeds its sup-norm budget: max |q| = {found:.6e} > kappa = {kappa:.6e}")]
    PotentialBound { found: f64, kappa: f64 },

    #[error("potential pair differs on the shell (max |q1 - q2| on shell = {0:.6e})")]
    NotAdmissiblePair(f64),

    #[error("spectral proximity: lambda = {lambda:.12e} is within margin of discrete eigenvalue {eigenvalue:.12e}")]
    SpectralProximity { lambda: f64, eigenvalue: f64 },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigNonConvergence { iterations: usize, residual: f64 },

    #[error("resolvent distance {0:.3e} below divergence guard")]
    ResolventDivergence(f64),

    #[error("lattice resonance: |P_xi| = {min_symbol:.3e} below guard {guard:.3e}; try a different lattice shift")]
    LatticeResonance { min_symbol: f64, guard: f64 },

    #[error("fixed point diverged: |Im xi| = {im_xi:.6e}, measured Lipschitz estimate {lipschitz:.6e}")]
    ContractionFailure { im_xi: f64, lipschitz: f64 },

    #[error("discrete dispersion correction failed: {0}")]
    Dispersion(String),

    #[error("mismatched frequency pair between the two solutions")]
    MismatchedPair,

    #[error("trace data not expressed in the map's input basis ({expected} coefficients, got {got})")]
    BasisMismatch { expected: usize, got: usize },

    #[error("schedule out of range: {0}")]
    ScheduleRange(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
