use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("solution left its branch: {0}")]
    BranchIdentity(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("dimension {requested} exceeds the cap of {cap}")]
    Capacity { requested: u128, cap: usize },

    #[error("step size underflow at t = {t}")]
    Stiffness { t: f64 },

    #[error("field blew up after t = {last_valid_t}")]
    BlowUp { last_valid_t: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
