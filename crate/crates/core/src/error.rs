//! Crate-wide error type.
//!
//! Errors fall into two broad families: configuration problems (bad
//! parameters, missing inputs) and numerical degeneracies discovered while
//! estimating (no conditioning mass, infeasible interval indices, solver
//! failure). The CLI maps the families to distinct exit codes.

use thiserror::Error;

/// Everything that can go wrong while building models or running estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// IO failure while reading or writing model files, reports or caches.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A model or config document failed to parse.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// Cholesky pivot fell below the tolerance, the matrix is not
    /// (numerically) positive definite.
    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// The Jacobi eigenvalue sweep did not reach the off-diagonal threshold.
    #[error("symmetric eigensolver did not converge within {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    /// Parameter generation kept producing indefinite covariances.
    #[error("could not generate a positive definite covariance after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    /// The conditioning dimension carries no positive curvature, so the
    /// scenario weights are undefined.
    #[error("largest X curvature is not positive ({gamma:e}); the conditional weight construction needs gamma1[d-1] > 0")]
    CurvatureNotPositive { gamma: f64 },

    /// Every scenario weight came out zero: the conditioning level was never
    /// reachable from the sampled scenarios.
    #[error("degenerate importance weights: {detail}")]
    DegenerateWeights { detail: String },

    /// The requested quantile falls in mass carried only by +infinity
    /// sentinels (scenarios that never cross the conditioning level).
    #[error("quantile at beta = {beta} lands on non-crossing scenarios (infinite loss); crossed mass {crossed_mass:.6} is insufficient")]
    InfiniteQuantile { beta: f64, crossed_mass: f64 },

    /// Distribution-free CI order statistics fall outside 1..k.
    #[error("batch count k = {k} cannot support a {level:.3} interval at beta = {beta}; smallest feasible k is {min_k}")]
    InfeasibleCi {
        k: usize,
        beta: f64,
        level: f64,
        min_k: usize,
    },

    /// No sample point fell inside the conditioning band.
    #[error("no observations inside |x - {x:e}| <= {eps:e}; widen eps or enlarge the sample")]
    EmptyBand { x: f64, eps: f64 },

    /// The quantile-regression solver hit its iteration cap.
    #[error("quantile regression did not converge within {iterations} iterations (last iterate a = {a:e}, b = {b:e})")]
    QreNoConvergence { iterations: usize, a: f64, b: f64 },

    /// A delta-gamma experiment was requested without any usable truth.
    #[error("no reference CoVaR available for this model; pass --reference <value> or --reference-run <n_ref>")]
    MissingReference,
}

pub type Result<T> = std::result::Result<T, Error>;
