use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lag {lag} aliases on a grid of {grid} nodes (need |lag| < {half})", half = .grid / 2)]
    Aliasing { lag: i64, grid: usize },

    #[error("density is not positive semidefinite at grid node {node} (lambda = {lambda:.6}, min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd {
        node: usize,
        lambda: f64,
        min_eigenvalue: f64,
    },

    #[error("minimality condition violated: {0}")]
    Minimality(String),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("singular factor at grid node {node}: {detail}")]
    SingularFactor { node: usize, detail: String },

    #[error("unsupported multiplicity: {0}")]
    UnsupportedMultiplicity(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("infeasible class: {0}")]
    InfeasibleClass(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sample rejected: {0}")]
    SampleRejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad arguments or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::Minimality(_)
                | Error::IllPosed(_)
                | Error::SingularFactor { .. }
                | Error::UnsupportedMultiplicity(_)
                | Error::Convergence { .. }
                | Error::InfeasibleClass(_)
                | Error::Aliasing { .. }
        )
    }
}
