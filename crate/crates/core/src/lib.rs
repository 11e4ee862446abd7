//! Variance-estimation exploration: exponentially weighted return variance,
//! tabular and deep Q-learners that act on `q + c * sigma`, and a seeded
//! experiment harness.

#![allow(clippy::needless_range_loop)]

pub mod dqn;
pub mod envs;
pub mod error;
pub mod harness;
pub mod neural;
pub mod par;
pub mod replay;
pub mod select;
pub mod stats;
pub mod tabular;
pub mod varcore;

pub use error::{Error, Result};
