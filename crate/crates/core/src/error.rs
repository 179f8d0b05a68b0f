use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown scale `{0}`")]
    UnknownScale(String),
    #[error("invalid scale parameter: {0}")]
    InvalidScaleParam(String),
    #[error("value {value} below the range of scale `{scale}` (minimum {min})")]
    BelowRange { scale: String, value: f64, min: f64 },
    #[error("iterated logarithm undefined at depth {depth} for x = {x}")]
    IteratedLogDomain { depth: usize, x: f64 },
    #[error("grid invalid: {0}")]
    InvalidGrid(String),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("series truncation exhausted after {terms} terms")]
    TruncationExhausted { terms: usize },
    #[error("no power-series view available for this function")]
    NoSeriesView,
    #[error("derivative order {requested} exceeds cache depth {max}")]
    DerivativeDepth { requested: usize, max: usize },
    #[error("quadrature did not converge within {panels} panels")]
    QuadratureBudget { panels: usize },
    #[error("radius {r} beyond declared divisor validity {valid}")]
    DivisorRange { r: f64, valid: f64 },
    #[error("declared pole at {location} is not a zero of the denominator (|den| = {residual:e})")]
    PoleMismatch { location: String, residual: f64 },
    #[error("function is a polynomial; lemma inapplicable")]
    PolynomialInput,
    #[error("too few valid samples: {valid} (need {needed})")]
    TooFewSamples { valid: usize, needed: usize },
    #[error("degenerate abscissa range in slope fit")]
    DegenerateFit,
    #[error("excluded {excluded} of {total} tail radii (budget {budget_pct}%)")]
    ExclusionBudget { excluded: usize, total: usize, budget_pct: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("no ray reaches radius {0}")]
    NoRayAtRadius(f64),
    #[error("near-degenerate Wronskian at {0}")]
    DegenerateWronskian(String),
    #[error("reduction function vanishes at {0}")]
    VanishingReducer(String),
    #[error("not a solution: relative residual {0:e}")]
    NotASolution(f64),
    #[error("root finder did not converge (degree {0})")]
    RootFinder(usize),
    #[error("interval spacing condition violated at j = {0}")]
    Spacing(usize),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
