use thiserror::Error;

/// Errors raised by the potential, analysis, and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient quadrature resolution: {0}")]
    InsufficientResolution(String),

    #[error("spectrum {lambda:?} lies outside the physical interval (-1/3, 2/3)")]
    NonPhysical { lambda: [f64; 3] },

    #[error("dual Newton solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("moment constraint violated: residual {residual:.3e} exceeds {limit:.1e} (quadrature too coarse)")]
    ConstraintViolation { residual: f64, limit: f64 },

    #[error("entropy did not increase along feasible direction {direction} (change {change:.3e})")]
    OptimalityViolation { direction: usize, change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("direction {gamma:?} has a non-isolated maximum; use the coincident-multiplier (case II) integrals")]
    DegenerateDirection { gamma: [f64; 3] },

    #[error("temperature lost positivity at node {node} (theta = {theta:.3e}, t = {time})")]
    PositivityLoss { node: usize, theta: f64, time: f64 },

    #[error("Q-tensor left the physical region at node {node} after {halvings} step halvings (t = {time})")]
    PhysicalityLoss { node: usize, halvings: usize, time: f64 },

    #[error("non-finite value in field {field} at t = {time}")]
    NotFinite { field: &'static str, time: f64 },

    #[error("potential evaluation failed at node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("operation requires singular-flux mode (A_minus2 > 0)")]
    ModeMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
