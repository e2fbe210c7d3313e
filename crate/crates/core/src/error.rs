use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unparsable exponent {0:?}")]
    Exponent(String),
    #[error("coefficient must be positive and finite, got {0}")]
    Coefficient(f64),
    #[error("division by structural zero")]
    DivisionByZero,

    #[error("malformed chain document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("chain has no states")]
    NoStates,
    #[error("duplicate state label {0:?}")]
    DuplicateState(String),
    #[error("duplicate bond {0:?} -> {1:?}")]
    DuplicateBond(String, String),
    #[error("self-loop bond at state {0:?}")]
    SelfLoop(String),
    #[error("bond references unknown state {0:?}")]
    UnknownState(String),
    #[error("bond {from:?} -> {to:?}: {source}")]
    Bond {
        from: String,
        to: String,
        #[source]
        source: Box<Error>,
    },
    #[error("chain is not irreducible: state {0:?} cannot reach every other state")]
    NotIrreducible(String),
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),

    #[error("state index {0} is not in the current subset")]
    NotInSubset(usize),
    #[error("state index {0} has zero total out-rate")]
    ZeroOutRate(usize),
    #[error("target subset is empty")]
    EmptySubset,
    #[error("invalid state sets: {0}")]
    InvalidSets(String),
    #[error("singular linear system")]
    Singular,

    #[error("measure is not stationary (imbalance {0:e})")]
    NotStationary(f64),
    #[error("residual generator went negative ({0:e}) at {1} -> {2}")]
    NegativeResidual(f64, usize, usize),
    #[error("residual generator has no positive arrow")]
    NoPositiveArrow,
    #[error("residual generator has arrows on no cycle")]
    Undecomposable,

    #[error("level needs at least two valleys")]
    TooFewValleys,
    #[error("infinite limit in {0}")]
    InfiniteLimit(String),
    #[error("{0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
