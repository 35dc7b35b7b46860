use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed network topology (bad indices, empty edge set, ...).
    #[error("invalid network structure: {0}")]
    Structure(String),

    /// Geometric input that violates a data invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A value outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke an operation's precondition (dimensions, h > delta, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("no point within snapping tolerance {tolerance} (closest at distance {distance})")]
    Snap { distance: f64, tolerance: f64 },

    #[error("no data: the point pattern is empty")]
    NoData,

    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
        last_gamma: alloc::vec::Vec<f64>,
    },

    /// The fitted coefficients lie in the penalty null space, so the
    /// smoothing parameter update is unbounded.
    #[error("smoothing parameter diverges (penalty of the fit is zero)")]
    RhoDiverges,

    #[error("study failed: {failed} of {total} replicates failed for n = {n}")]
    Study { n: usize, failed: usize, total: usize },
}
