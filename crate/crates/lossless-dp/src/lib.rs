//! Correlated-noise differential privacy: answer the same query at many
//! privacy levels, in any order, while paying only for the strongest level
//! ever released.
//!
//! The core object is the release [`Ledger`](ledger::Ledger): it records past
//! noisy answers and couples every new one to its recorded neighbors so that
//! each answer is marginally identical to a fresh release, yet any subset of
//! answers together reveals no more than the single strongest one.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Frozen reference constants keep every digit they were computed with.
#![allow(clippy::excessive_precision)]
// Parallel arrays in the numerical kernels are indexed by position.
#![allow(clippy::needless_range_loop)]

pub mod account;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod factorization;
pub mod hist;
pub mod ledger;
pub mod noise;
pub mod rng;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use ledger::{Ledger, Release, RhoBound};
pub use noise::Mechanism;
