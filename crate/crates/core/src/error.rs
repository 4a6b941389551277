use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid hyperparameter box: {0}")]
    InvalidBox(String),
    #[error("invalid hyperparameter point: {0}")]
    InvalidPoint(String),
    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),
    #[error("p-values do not match constraints: {0}")]
    Structural(String),
    #[error("invalid design request: {0}")]
    Design(String),
    #[error("simulation failed at lambda = {lambda:?}: {reason}")]
    Simulation { lambda: Vec<f64>, reason: String },
    #[error("simulation bank: {0}")]
    Bank(String),
    #[error("regression fit: {0}")]
    Fit(String),
    #[error("density estimate: {0}")]
    Density(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("wave {wave}: every point failed to evaluate ({reason})")]
    DegenerateWave { wave: usize, reason: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
