use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),

    #[error("{0} is not positive semidefinite")]
    NotPositiveSemidefinite(&'static str),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("C must have full row rank")]
    RankDeficientOutput,

    #[error("Lyapunov operator is unstable (spectral radius {rho})")]
    Unstable { rho: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("innovation covariance C Sigma C^T is numerically singular")]
    SingularInnovation,

    #[error("{0} is numerically singular")]
    Singular(&'static str),

    #[error("controller is not stabilizing (closed-loop spectral radius {rho})")]
    NotStabilizing { rho: f64 },

    #[error("controller pair (C_K, A_K) is not observable")]
    NotObservable,

    #[error("similarity transform is singular or ill-conditioned")]
    SingularTransform,

    #[error("optimal similarity transformation does not exist: {0} is singular")]
    OptimalTransformNotFound(&'static str),

    #[error("X12 is singular; no observable stationary point of observer-based form can be built")]
    SingularX12,

    #[error("no stabilizing observable controller found after {attempts} attempts")]
    InitFailed { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("problem file: {0}")]
    Schema(String),
}
