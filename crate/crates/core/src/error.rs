use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("(+inf) + (-inf) is undefined")]
    UndefinedSum,
    #[error("NaN is not an extended real")]
    NotANumber,
    #[error("region has empty interior")]
    EmptyInterior,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("region cannot be sampled without a window: {0}")]
    Unbounded(String),
    #[error("function value is not finite at the base point")]
    InfiniteAtBase,
    #[error("no sampled point of the region has a finite sum")]
    EmptyCoupling,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("no finite value in the cloud")]
    AllInfinite,
    #[error("base point is not part of the cloud")]
    BaseNotInCloud,
    #[error("function is not bounded below on the ball (sampled minimum {0})")]
    NotBoundedBelow(f64),
    #[error("point is not a quasiuniform epsilon-minimum (margin {0})")]
    QuasiuniformEpsMinNotCertified(f64),
    #[error("no admissible coupling weight up to {0}")]
    GammaSearchFailed(f64),
    #[error("function has no subgradient oracle: {0}")]
    NoSubgradOracle(String),
    #[error("set has no normal-cone oracle: {0}")]
    NoNormalConeOracle(String),
    #[error("dual vector is not a subgradient at the base point")]
    NotASubgradient,
    #[error("base point is not in the intersection")]
    BaseNotInIntersection,
    #[error("Jacobian is unavailable")]
    JacobianUnavailable,
    #[error("generator set is empty")]
    EmptySet,
    #[error("point is not in the box")]
    NotInBox,
    #[error("invalid bounds: need lo <= 0 <= hi componentwise")]
    InvalidBounds,
    #[error("objective is not a separable quadratic")]
    NonSeparableObjective,
    #[error("unknown gallery case: {0}")]
    UnknownCase(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("{0}")]
    Parse(#[from] crate::problem::ParseError),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
