//! Sparse Fourier learning over finite abelian groups with query access.
//!
//! The crate is organised bottom-up: [`group`] holds the arithmetic and the
//! exhaustive transform used as a reference, [`functions`] the oracle zoo,
//! [`sft`] the coset-search algorithm, [`modswitch`] the lift from `Z_p` to a
//! power of two, [`hnp`] the hidden-number solvers, [`limits`] the negative
//! results, and [`experiment`] the named, seeded experiment runner behind the
//! `sft` binary.

pub mod error;
pub mod exec;
pub mod experiment;
pub mod functions;
pub mod group;
pub mod hnp;
pub mod limits;
pub mod modswitch;
pub mod numth;
pub mod rng;
pub mod sft;

pub use error::{Error, Result};
pub use exec::Execution;
pub use functions::{OracleFn, QueryOracle};
pub use group::{Element, FnTable, GroupSpec, SubgroupLevel};
pub use num_complex::Complex64;
pub use sft::{HeavyList, SftParams};
