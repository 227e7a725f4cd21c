use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("coefficient value {value} at cell {cell} is not positive")]
    NonPositiveCoefficient { cell: usize, value: f64 },

    #[error("parameter {0:?} is outside the family domain")]
    UnknownParameter(Vec<f64>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parametric family has no parameter points")]
    EmptyFamily,

    #[error("snapshot basis is empty")]
    EmptyBasis,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value {value} at cell {cell} is outside the admissible bounds [{lower}, {upper}]")]
    OutOfBounds {
        cell: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("brute-force oracle supports at most 3 columns, got {0}")]
    OracleTooLarge(usize),

    #[error("probe support leaves the domain")]
    ProbeOutOfDomain,

    #[error("probe width {eps} is not resolved by the grid (needs at least {min_cells} cells of width {h})")]
    ProbeUnresolved { eps: f64, h: f64, min_cells: usize },

    #[error("probe {0} has zero norm")]
    DegenerateProbe(usize),

    #[error("coefficient grid does not align with the mesh: {0}")]
    AlignmentError(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
