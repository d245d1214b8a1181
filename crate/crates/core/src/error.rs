use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("points {i} and {j} coincide")]
    DegenerateInput { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("side lengths ({0}, {1}, {2}) violate the triangle inequality")]
    NotATriangle(f64, f64, f64),

    #[error("distances do not describe a planar quadrilateral: {0}")]
    NotAQuadrilateral(String),

    #[error("distances admit no realization in R^3 (Cayley-Menger determinant {0:e})")]
    NotEmbeddable(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate geometry: rank {rank}, need at least {required}")]
    DegenerateGeometry { rank: usize, required: usize },

    #[error("singular values are not separated; the SVD route is ambiguous (use kabsch)")]
    AmbiguousSvd,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("at least 11 points are required, got {0}")]
    TooSmall(usize),

    #[error("{count} tuples exceed the exhaustive budget of {budget}; use the randomized check")]
    UseRandomized { count: u128, budget: u128 },

    #[error("tuple count overflows for n = {0}")]
    CountOverflow(usize),

    #[error("no assembly of tetrahedra reaches the requested volume")]
    NoAssembly,

    #[error("inconsistent assembly: {0}")]
    InconsistentAssembly(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
