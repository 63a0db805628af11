use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] rblab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid model file: {0}")]
    ModelFile(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("n = {n}, sample path {path} (seed {seed}, run index {run_index}) failed: {source}")]
    PathFailed { n: usize, path: usize, seed: u64, run_index: u64, source: Box<Error> },
    #[error("least-squares design is rank deficient (σ_min/σ_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("{0}")]
    Fit(String),
    #[error("nothing to emit: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}
