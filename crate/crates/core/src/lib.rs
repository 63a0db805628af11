//! Planning and learning algorithms for restless multi-armed bandits.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. It provides:
//!
//! * [`arm`]: arm and bandit-instance types, validation and mixing diagnostics;
//! * [`eval`]: average-reward policy evaluation and exact joint-MDP oracles;
//! * [`whittle`]: Whittle indices via the adaptive-greedy procedure, a
//!   λ-bisection oracle and index-policy action selection;
//! * [`bayes`]: Dirichlet posteriors over unknown transition rows;
//! * [`tsde`]: Thompson sampling with dynamic episodes (RB-TSDE);
//! * [`qwi`]: a two-timescale Q-learning baseline;
//! * [`envgen`]: stochastically monotone matrices and the benchmark environments;
//! * [`sim`]: the environment interface, a simulator and run traces.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod arm;
pub mod bayes;
pub mod envgen;
mod error;
pub mod eval;
mod linalg;
mod matrix;
pub mod qwi;
pub mod rng;
pub mod sim;
pub mod tsde;
pub mod whittle;

pub use arm::{Arm, BanditInstance, JointState, RewardModel, Violation, ViolationKind};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use sim::{Algorithm, Environment, RunTrace, Simulator};
pub use whittle::WhittleTable;

/// Absolute tolerance on row sums of stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
