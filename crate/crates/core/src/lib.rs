//! Exact desk-scale simulation of a non-collapsing measurement oracle and
//! the puzzle, collision and primitive reductions built on top of it.

pub mod bits;
pub mod checks;
pub mod dcrpuzz;
pub mod dist;
pub mod error;
pub mod ncmo;
pub mod primitives;
pub mod puzzles;
pub mod qsim;

pub use bits::BitString;
pub use dist::{FiniteDist, EmpiricalDist};
pub use error::{Error, Result};

/// Random source used throughout; seeded runs are reproducible.
pub type SimRng = rand_chacha::ChaCha8Rng;
