use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by meshing, assembly, factorization and the eigensolvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("meshes are not nested: {0}")]
    Nesting(String),

    #[error("refraction index violates n > 1: {0}")]
    Model(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotSpd { row: usize, pivot: f64 },

    #[error("iteration limit of {limit} sweeps exceeded")]
    IterationLimit { limit: usize },

    #[error("linear system is singular to working precision")]
    SingularSystem,

    /// Fewer than the requested number of eigenpairs converged. The converged
    /// eigenvalues are kept so callers can still report them.
    #[error("only {} of {wanted} eigenpairs converged", converged.len())]
    Convergence {
        wanted: usize,
        converged: Vec<Complex64>,
    },

    #[error("no dual eigenvalue matches primal eigenvalue {lambda}")]
    Pairing { lambda: Complex64 },

    #[error("dual cluster Gram matrix is singular")]
    DegenerateCluster,

    #[error("dual projection collapsed (A-norm {norm:e})")]
    ProjectionCollapse { norm: f64 },

    #[error("generalized Rayleigh quotient is degenerate (|B| = {value:e})")]
    QuotientDegenerate { value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
