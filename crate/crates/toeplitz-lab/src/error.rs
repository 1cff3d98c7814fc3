use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("block size mismatch: {0} vs {1}")]
    BlockSizeMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid of {grid} samples cannot resolve band {band} (need a power of two >= 2K+2)")]
    Aliasing { grid: usize, band: usize },

    #[error("symbol is singular on the grid (min |det| = {min_det:.3e})")]
    SingularSymbol { min_det: f64 },

    #[error("phase jump of {jump:.3} rad between adjacent nodes; grid too coarse")]
    UnderResolved { jump: f64 },

    #[error("no canonical factorization: winding number {0}")]
    NonzeroWinding(i64),

    #[error("factor constraint violated: {0}")]
    FactorViolation(String),

    #[error("determinant vanishes: {0}")]
    SingularDeterminant(String),

    #[error("cutoff too small: doubling M moved an entry by {delta:.3e}")]
    CutoffTooSmall { delta: f64 },

    #[error("eigenvalue solver did not converge (size {0})")]
    EigenFailure(usize),

    #[error("quadrature did not converge: last change {delta:.3e} at {nodes} nodes")]
    QuadratureNonConvergence { delta: f64, nodes: usize },

    #[error("unstable constant: M-doubling changed the value by {delta:.3e}")]
    UnstableConstant { delta: f64 },

    #[error("contour rejected: {0}")]
    ContourInvalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            LabError::Config(_) | LabError::Io(_) | LabError::InvalidArgument(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
