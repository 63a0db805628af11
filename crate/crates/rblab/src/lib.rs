//! Experiment harness, file formats and command-line front end for
//! restless-bandit learning.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
mod error;
pub mod harness;
pub mod model;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

/// Version of every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
