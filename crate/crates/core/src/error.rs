use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice scale must lie in (0, 1], got {0}")]
    InvalidScale(f64),

    #[error("invalid piecewise polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid literal `{0}`: expected a decimal or a rational p/q")]
    InvalidLiteral(String),

    #[error("{quad_points} quadrature points cannot resolve {order} Fourier coefficients (need a power of two >= 4K)")]
    Aliasing { order: usize, quad_points: usize },

    #[error("decay fit refused: only {nonzeros} usable coefficients (need >= 3 and K >= 16)")]
    FitRefused { nonzeros: usize },

    #[error("fitted decay ratio {ratio} is not below 1")]
    NotDecaying { ratio: f64 },

    #[error("sequence carries no tail certificate")]
    MissingTail,

    #[error("tolerance {eps:e} is below the tail certificate {tail:e}: increase K")]
    IncreaseK { eps: f64, tail: f64 },

    #[error("band approximant with error {eps} may be singular (needs eps < {limit})")]
    NotInvertible { eps: f64, limit: f64 },

    #[error("index {index} lies outside the certified interior [{lo}, {hi}]")]
    NotInterior { index: i64, lo: i64, hi: i64 },

    #[error("window [{lo}, {hi}] too small: need at least [{need_lo}, {need_hi}]")]
    WindowTooSmall { lo: i64, hi: i64, need_lo: i64, need_hi: i64 },

    #[error("window of size {required} exceeds the cap {cap} (t too small for desk-scale resources)")]
    WindowCap { required: usize, cap: usize },

    #[error("interval [{a}, {b}] does not contain the inflated operator reach [{need_a}, {need_b}]")]
    IntervalTooSmall { a: f64, b: f64, need_a: f64, need_b: f64 },

    #[error("power iteration hit the cap of {iterations} iterations (last estimate {last})")]
    PowerIterationCap { last: f64, iterations: usize },

    #[error("coefficient support [{lo}, {hi}] violates the admissible range [{min}, {max}]")]
    SupportViolation { lo: i64, hi: i64, min: i64, max: i64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular")]
    Singular,

    #[error("eigendecomposition produced eigenvalue {0} outside the admissible range")]
    Spectrum(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
