use thiserror::Error;

use crate::specdsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tree order must be at least 1, got {0}")]
    InvalidOrder(u32),

    #[error("depth {requested} exceeds the configured maximum depth {max}")]
    DepthExceeded { requested: usize, max: usize },

    #[error("vertex {0} lies beyond the configured maximum depth")]
    VertexOutOfRange(usize),

    #[error("spin {spin} out of range for a spin set of size {size}")]
    SpinOutOfRange { spin: u64, size: u64 },

    #[error("{what} needs {needed} units but the budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("operation requires finite spins: {0}")]
    FiniteSpinsRequired(&'static str),

    #[error("cylinder has base depth {base} but the measure lives at depth {depth}")]
    BaseTooDeep { base: usize, depth: usize },

    #[error("finite mass required: {0}")]
    InfiniteMass(String),

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("parts {0} and {1} are not disjoint")]
    NotDisjoint(usize, usize),

    #[error("expected an inclusion: {0}")]
    NotSubset(String),

    #[error("cylinder base depth {requested} exceeds the verified depth {verified}")]
    UnverifiedDepth { requested: usize, verified: usize },

    #[error("family is inconsistent: {0}")]
    Inconsistent(String),

    #[error("family is only defined up to depth {max}, requested {requested}")]
    FamilyDepth { requested: usize, max: usize },

    #[error("spin sets differ between operands")]
    SpinMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
