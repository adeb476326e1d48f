//! Four-state cycle simulator and the bounded equivalence oracle.

pub mod bits;
mod elab;
mod equiv;
mod exec;

pub use bits::Bits;
pub use equiv::{check_equivalence, Counterexample, EquivBudget, EquivVerdict};
pub use exec::{simulate, Simulator};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("combinational logic did not settle")]
    NoConvergence,
    #[error("port interfaces differ: {0}")]
    PortMismatch(String),
}
