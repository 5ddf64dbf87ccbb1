//! Möbius monotonicity and strong stationary duality for ergodic Markov
//! chains on finite partially ordered state spaces.
//!
//! The pipeline for a chain `(nu, P)` on a poset:
//!
//! 1. [`poset`]: order, enumeration, zeta matrix `C` and Möbius matrix `C^{-1}`.
//! 2. [`chain`]: validation, stationary law `pi`, time reversal, the
//!    cumulative operators `S_down`, `S_up` and their Möbius inverses.
//! 3. [`monotonicity`]: `C^{-1} P C >= 0` (down) or `(C^T)^{-1} P C^T >= 0`
//!    (up), plus weak and strong stochastic monotonicity.
//! 4. [`dual`]: the absorbing strong stationary dual `(nu*, P*)` and its link.
//! 5. [`convergence`]: separation distance, absorption-time law, Monte Carlo.
//!
//! [`cube`] generates nearest-neighbour walks on `{0,1}^d` and their
//! variants; [`availability`] builds the node breakdown/repair chain of an
//! unreliable network and runs it through the whole pipeline.
//!
//! Vectors are row vectors acting from the left, `nu P`.

pub mod availability;
pub mod chain;
pub mod convergence;
pub mod cube;
pub mod dual;
mod error;
pub mod exact;
pub mod monotonicity;
pub mod par;
pub mod poset;
pub mod spectrum;

pub use chain::{Chain, StationaryLaw};
pub use error::{Error, ErrorKind, Result, RowViolation};
pub use par::Exec;
pub use poset::{Poset, ZetaMobius};

pub use nalgebra::{DMatrix, DVector};

/// Which half of the duality theory is in use: the down case absorbs at the
/// unique maximal state, the up case at the unique minimal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Direction> {
        match s {
            "down" => Ok(Direction::Down),
            "up" => Ok(Direction::Up),
            other => Err(Error::InvalidParameter(format!("unknown direction `{other}`"))),
        }
    }
}

/// Float tolerances shared by the whole crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Row sums and probability-vector checks.
    pub row: f64,
    /// Derived identities: stationarity residual, duality residuals.
    pub identity: f64,
    /// Sign checks in the monotonicity tests.
    pub mono: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            row: 1e-12,
            identity: 1e-10,
            mono: 1e-10,
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
