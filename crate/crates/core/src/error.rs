use thiserror::Error;

/// Errors produced by the simulator and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid model or solver parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the domain where a routine is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scaled view asked for a time the path was not recorded at.
    #[error("no record at unscaled time {time} (scaled time {scaled_time}); record it explicitly instead of interpolating")]
    MissingRecordTime { time: f64, scaled_time: f64 },

    /// The explicit first-level solution is only known on one branch.
    #[error("closed form only covers v1 < ln(1/(1-lambda)) = {limit}; got v1 = {v1}, use solve_fluid")]
    BranchUnsupported { v1: f64, limit: f64 },

    /// Truncated state space exceeds the oracle's size cap.
    #[error("state space has more than {limit} states")]
    StateSpaceTooLarge { limit: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
