use thiserror::Error;

/// Errors raised by the analytical models, optimizers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("bisection did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: u32 },

    #[error("feature dimension {dim} is not divisible by the number of classes {classes}")]
    IndivisibleDimensions { dim: usize, classes: usize },

    #[error("cannot fuse an empty set of feature vectors")]
    EmptyFusion,

    #[error("infeasible deadline: {0}")]
    InfeasibleDeadline(String),

    #[error("packet length {value} outside the surrogate domain [1, {max}]")]
    DomainViolation { value: f64, max: u64 },

    #[error("no feasible packet length reaches decoding error {target:e}")]
    TargetUnreachable { target: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
