use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("multichain or degenerate policy {policy:?}: linear system is singular (rcond estimate {rcond:e})")]
    Singular { policy: Vec<u8>, rcond: f64 },

    #[error("chain is reducible with more than one closed class (rcond estimate {rcond:e})")]
    Reducible { rcond: f64 },

    #[error("{what} has {size} entries, above the exact-oracle limit {limit}; use the long-rollout gain estimator instead")]
    TooLarge { what: &'static str, size: usize, limit: usize },

    #[error("relative value iteration did not converge after {sweeps} sweeps (span {span:e})")]
    NoConvergence { sweeps: usize, span: f64 },

    #[error("degenerate: no activity change for any candidate state with passive set {passive:?}")]
    NoActivityChange { passive: Vec<usize> },

    #[error("index computation failed for passive set {passive:?}: {source}")]
    PassiveSet { passive: Vec<usize>, source: Box<Error> },

    #[error("bracket [{lo}, {hi}] does not straddle the index of state {state}")]
    Bracket { state: usize, lo: f64, hi: f64 },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange { what: &'static str, index: usize, limit: usize },

    #[error("episode {episode}: index computation failed on the sampled model twice: {source}")]
    SampledModel { episode: usize, source: Box<Error> },

    #[error("episode invariant violated: {0}")]
    EpisodeInvariant(String),

    #[error("q-learning diverged on arm {arm}: |Q| = {value:e}")]
    Diverged { arm: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
