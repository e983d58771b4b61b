use thiserror::Error;

use crate::submodel::PurifiedScoreReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("moment order {requested} exceeds the configured cap of {cap}")]
    OrderCap { requested: usize, cap: usize },

    #[error("integrand is not finite at node x = {node}")]
    NonFinite { node: f64 },

    #[error("x = {x} lies outside the support of the measure")]
    OutsideSupport { x: f64 },

    #[error(
        "Hankel order {order} needs more support points than the {atoms} atoms of this measure \
         (order must stay below the atom count)"
    )]
    FiniteSupport { order: usize, atoms: usize },

    #[error("matrix is not positive definite: pivot {index} = {pivot:e} at {bits} bits")]
    NotPositiveDefinite { index: usize, pivot: f64, bits: u32 },

    #[error("Jacobi eigenvalue iteration did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate submodel: {0}")]
    Degenerate(String),

    #[error(
        "purified-score series did not converge by j = {}: last relative change {:e}",
        .0.truncation_order,
        .0.tail_estimate
    )]
    NotConverged(Box<PurifiedScoreReport>),

    #[error("unsupported frequency measure: {0}")]
    UnsupportedFrequencyMeasure(String),

    #[error("probability {value} for {what} falls outside [0, 1]; the mode series is truncated too early")]
    Probability { what: String, value: f64 },

    #[error("coefficient underflow: {0}")]
    Underflow(String),

    #[error("domination conditions failed: {0}")]
    Domination(String),

    #[error("mismatched PSF / frequency-measure pair: {0}")]
    Mismatch(String),

    #[error("evaluation failed at delta = {delta}: {source}")]
    Sweep { delta: f64, source: Box<Error> },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
