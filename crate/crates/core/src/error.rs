use std::path::PathBuf;

use thiserror::Error;

use crate::allocator::Infeasibility;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("user index {index} out of range for cluster of {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),

    #[error("budget {budget} W is below the cluster minimum {q_min} W")]
    BudgetBelowMinimum { budget: f64, q_min: f64 },

    #[error("{count} users cannot fill {subchannels} subchannels")]
    TooFewUsers { count: usize, subchannels: usize },

    #[error("cluster of {0} users is too large for grid search (at most 3)")]
    ClusterTooLarge(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
