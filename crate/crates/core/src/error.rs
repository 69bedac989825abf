use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("axis {axis} has {cells} cells; at least 4 are required")]
    TooFewCells { axis: usize, cells: usize },

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field value at node {node} is not finite")]
    NonFinite { node: usize },

    #[error("time step {dt} violates the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("radial stencil is not monotone: dx = {dx} exceeds 2*rho/(n-1) at rho = {rho}")]
    RadialStencil { dx: f64, rho: f64 },

    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),

    #[error("Gauss-Seidel did not converge after {sweeps} sweeps (last update {update:e}, residual {residual:e})")]
    NonConvergence { sweeps: usize, update: f64, residual: f64 },

    #[error("step failed at t = {t}: {source}")]
    StepFailed { t: f64, source: Box<Error> },

    #[error("boundary data incompatible with initial enthalpy at node {node} (x = {point:?}): chi(h0) = {chi_h0}, theta = {theta}")]
    Incompatible { node: usize, point: Vec<f64>, chi_h0: f64, theta: f64 },

    #[error("trajectory has {got} snapshots; at least {needed} are required")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("test function is negative ({value:e}) at {point:?}, t = {t}")]
    NegativeTestFunction { point: Vec<f64>, t: f64, value: f64 },

    #[error("invalid barrier parameters: {0}")]
    BarrierParams(String),

    #[error("parameter search failed: {0}")]
    SearchFailed(String),

    #[error("convolution radius {r} is below 2*max(dx, dt_snapshot) = {min}")]
    RadiusTooSmall { r: f64, min: f64 },

    #[error("neighborhood is not contained in the barrier validity region: {0}")]
    OutsideValidity(String),

    #[error("data not strictly separated on the parabolic boundary (gap {gap:e})")]
    NotSeparated { gap: f64 },

    #[error("grids differ")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sign change of the balance on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
