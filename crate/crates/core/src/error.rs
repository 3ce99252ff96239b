use thiserror::Error;

/// Errors raised while building, validating or clearing an order book.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("net curve has no nodes")]
    EmptyCurve,

    #[error("net curve nodes are not monotone at node {index}: {detail}")]
    NonMonotoneCurve { index: usize, detail: String },

    #[error("node price {price} lies outside the area price interval [{lower}, {upper}]")]
    NodeOutsideInterval { price: f64, lower: f64, upper: f64 },

    #[error("invalid price interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("validation failed ({invariant}): {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("bid selection violates link {child} -> {parent}")]
    LinkViolation { child: String, parent: String },

    #[error("flex bid {0} is executed in more than one hour")]
    FlexMultiplicity(String),

    #[error("clearing condition violated by {residual} in area {area}, hour {hour}")]
    ClearingViolated {
        area: String,
        hour: usize,
        residual: f64,
    },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("cannot build a cut from empty loss sets")]
    EmptyLossSets,

    #[error("instance too large for enumeration: {binaries} binary decisions exceed the cap of {cap}")]
    TooLarge { binaries: usize, cap: usize },

    #[error("malformed document at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
