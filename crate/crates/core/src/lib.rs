//! Decentralized coordination of connected automated vehicles crossing an
//! unsignalized four-way intersection.
//!
//! Each vehicle entering the control zone solves a closed-form optimal
//! control problem for its control-zone trajectory and a second one for its
//! path through the merging zone, subject to terminal-time bounds that keep
//! it clear of every vehicle ahead in the crossing queue.

// `!(x > y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordinator;
pub mod cz;
pub mod error;
pub mod mz;
pub mod numerics;
pub mod oracle;
pub mod piecewise;
pub mod sim;
pub mod trajectory;
pub mod types;

pub use error::{Error, Result};
