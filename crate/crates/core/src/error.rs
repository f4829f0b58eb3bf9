use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("triangle vertices are collinear")]
    DegenerateTriangle,
    #[error("triangle weights must be positive, got s1 = {s1}, s2 = {s2}")]
    HypothesisTViolated { s1: f64, s2: f64 },
    #[error("lambda must be a positive integer")]
    ZeroLambda,
    #[error("side parameter a must be positive")]
    NonPositiveSide,
    #[error("vector ({0}, {1}) is not primitive")]
    NotPrimitive(i64, i64),
    #[error("cone generators are collinear")]
    EmptyInterior,
    #[error("polygon is not strictly convex")]
    NotConvex,
    #[error("grid of size {n} aliases frequency {max_freq}")]
    AliasedGrid { n: usize, max_freq: i64 },
    #[error("symbol minimum {min} is not above the positivity margin")]
    NonPositiveSymbol { min: f64 },
    #[error("mean has imaginary part {0}")]
    NonRealMean(f64),
    #[error("log-symbol spectrum leaves the double cone; singular transfer needed")]
    ConeTooNarrowForExactPath,
    #[error("matrix determinant is {0}, expected +-1")]
    NotUnimodular(i64),
    #[error("cone is not contained in a vertex cone of the polygon")]
    ConeNotInVertexCone,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("box radius {m} does not contain the polygon (extent {extent})")]
    BoxTooSmall { m: usize, extent: usize },
    #[error("structured inversion needs an exact-path factorization")]
    SingularPathUnsupported,
    #[error("dense size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("point ({0}, {1}) is outside the triangle")]
    PointOutsideTriangle(i64, i64),
    #[error("iteration stalled after {iterations} steps (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("sum has imaginary part {0:e}")]
    NonNegligibleImaginaryPart(f64),
    #[error("sup norm {0} of h is not below 1")]
    SymbolNotContraction(f64),
    #[error("need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: u32,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_lambda(self, lambda: u32) -> Self {
        Error::AtLambda {
            lambda,
            source: Box::new(self),
        }
    }
}
