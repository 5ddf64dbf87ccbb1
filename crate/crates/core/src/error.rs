use thiserror::Error;

use crate::monotonicity::MonotonicityReport;
use crate::Direction;

/// One offending row of a candidate stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum RowViolation {
    /// Entry below zero (or not finite).
    BadEntry { row: usize, col: usize, value: f64 },
    /// Row total outside `1 ± tolerance`.
    RowSum { row: usize, sum: f64 },
}

impl std::fmt::Display for RowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowViolation::BadEntry { row, col, value } => {
                write!(f, "row {row}: entry ({row}, {col}) = {value}")
            }
            RowViolation::RowSum { row, sum } => write!(f, "row {row}: sums to {sum}"),
        }
    }
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Precondition,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),

    #[error("order is not antisymmetric: `{a}` <= `{b}` and `{b}` <= `{a}`")]
    Cycle { a: String, b: String },

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("{what} = {value} exceeds the supported maximum {max}")]
    DimensionTooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not stochastic: {}", format_violations(.0))]
    NotStochastic(Vec<RowViolation>),

    #[error("initial law is not a probability vector: {0}")]
    BadInitialLaw(String),

    #[error("chain is not irreducible: state {to} is not reachable from state {from}")]
    NotIrreducible { from: usize, to: usize },

    #[error("chain is periodic with period {period}")]
    NotAperiodic { period: usize },

    #[error("more than {cap} up-sets to enumerate")]
    UpSetExplosion { cap: usize },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("precondition failed: {reason} (worst value {:.3e})", .report.worst_value)]
    PreconditionFailed {
        reason: String,
        report: Box<MonotonicityReport>,
    },

    #[error("poset has {count} {} elements, a unique one is required", extremal_word(*.direction))]
    NoUniqueExtremalState { direction: Direction, count: usize },

    #[error("poset is not a total order: states {a} and {b} are incomparable")]
    NotTotalOrder { a: usize, b: usize },

    #[error("poset is not a lattice: states {a} and {b} lack a meet or join")]
    NotLattice { a: usize, b: usize },

    #[error("states {x} and {y} are comparable, the move needs incomparable states")]
    IncomparableRequired { x: usize, y: usize },

    #[error("state {state} carries mass {available}, cannot move {kappa}")]
    InsufficientMass {
        state: usize,
        available: f64,
        kappa: f64,
    },

    #[error("chain has no initial law")]
    MissingInitialLaw,

    #[error("fundamental matrix (I - Q) is singular: the dual has a second absorbing class")]
    SingularFundamentalMatrix,

    #[error("horizon {horizon} exceeds the maximum {max}")]
    HorizonTooLarge { horizon: usize, max: usize },

    #[error("rates sum to {total}, which exceeds 1")]
    InadmissibleRates { total: f64 },

    #[error("holding probability at state {state} is negative ({value})")]
    NegativeHoldingProbability { state: usize, value: f64 },

    #[error("{function} has no value for subset mask {mask}")]
    MissingSubsetValue { function: &'static str, mask: usize },

    #[error("generator has no transitions")]
    ZeroGenerator,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::PreconditionFailed { .. }
            | Error::NoUniqueExtremalState { .. }
            | Error::NotTotalOrder { .. }
            | Error::NotLattice { .. }
            | Error::IncomparableRequired { .. }
            | Error::InsufficientMass { .. }
            | Error::InadmissibleRates { .. }
            | Error::NegativeHoldingProbability { .. }
            | Error::NotIrreducible { .. }
            | Error::NotAperiodic { .. } => ErrorKind::Precondition,
            Error::LpFailure(_)
            | Error::SingularFundamentalMatrix
            | Error::Numerical(_)
            | Error::UpSetExplosion { .. }
            | Error::HorizonTooLarge { .. } => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

fn format_violations(v: &[RowViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn extremal_word(d: Direction) -> &'static str {
    match d {
        Direction::Down => "maximal",
        Direction::Up => "minimal",
    }
}

pub type Result<T> = std::result::Result<T, Error>;
