use thiserror::Error;

/// Errors produced by the solvers, classifiers and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular within tolerance (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("max iterations exceeded ({iterations} iterations, residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("line search stalled (damping below {damping:e}, residual {residual:e})")]
    LineSearchStalled { damping: f64, residual: f64 },

    #[error("inconsistent jacobian at column {column}: analytic {analytic:e}, finite difference {finite_difference:e}")]
    InconsistentJacobian {
        column: usize,
        analytic: f64,
        finite_difference: f64,
    },

    #[error("max subdivision depth ({panels} panels)")]
    MaxSubdivision { panels: usize },

    #[error("non-monotone samples")]
    NonMonotoneSamples,

    #[error("non-convergent samples (successive change ratio {ratio})")]
    NonConvergentSamples { ratio: f64 },

    #[error("not eventually convex on window [{lo}, {hi}]")]
    NotEventuallyConvex { lo: f64, hi: f64 },

    #[error("g(a) must be positive, got g({a}) = {value}")]
    NonPositiveAtLowerBound { a: f64, value: f64 },

    #[error("nonpositive G on interval (G({at}) = {value})")]
    NonPositivePrimitive { at: f64, value: f64 },

    #[error("not nondecreasing on tail (g drops near s = {at})")]
    NotNondecreasing { at: f64 },

    #[error("no admissible splice point in [{lo}, {hi}]")]
    NoSplicePoint { lo: f64, hi: f64 },

    #[error("KO fails")]
    KoFails,

    #[error("KO violated — no large solution expected")]
    KoViolated,

    #[error("continuation not monotone at node {node} (level {level}: {previous} > {current})")]
    NotMonotone {
        level: usize,
        node: usize,
        previous: f64,
        current: f64,
    },

    #[error("invalid inner condition at pole")]
    InvalidPoleCondition,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("offset outside domain: {0}")]
    OffsetOutsideDomain(f64),

    #[error("window unresolved: radius {radius} lies beyond the resolved radius {resolved}")]
    WindowUnresolved { radius: f64, resolved: f64 },

    #[error("insufficient ladder depth: need {needed} levels, got {got}")]
    InsufficientLadder { needed: usize, got: usize },

    #[error("at continuation level {level}: {source}")]
    AtLevel { level: usize, source: Box<Error> },

    #[error("malformed nonlinearity descriptor `{0}`")]
    Descriptor(String),

    #[error("table: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    /// The innermost error, with continuation-level wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
