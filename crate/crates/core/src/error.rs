use thiserror::Error;

use crate::chain::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("budget exceeded: {what} needs {needed}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("instance failed validation ({} violation(s)): {}", .0.len(), summarize(.0))]
    ValidationFailed(Vec<Violation>),

    #[error("level {level} has zero unnormalized mass")]
    DegenerateLevel { level: usize },

    #[error("state {state} at level {level} has zero value; cannot condition on it")]
    ZeroValueState { level: usize, state: usize },

    #[error("self-check failed: {0}")]
    SelfCheckFailed(String),

    #[error("all particles died at step {step}")]
    AllParticlesDead { step: usize },

    #[error("no sample accepted after {rounds} rounds")]
    MaxRestartsExceeded { rounds: usize },

    #[error("acceptance probability {probability} > 1 at step {step} (eta below the PRM action coverage)")]
    AcceptanceAboveOne { step: usize, probability: f64 },

    #[error("final acceptance ratio {ratio} > 1: Z-tilde is below the realized estimate")]
    ZTildeTooSmall { ratio: f64 },

    #[error("transition row at level {level}, state {state} has zero tilted mass")]
    DegenerateRow { level: usize, state: String },

    #[error("chain is not a tree: state {state} at level {level} has more than one parent")]
    NotATree { level: usize, state: usize },

    #[error("walk exceeded the step cap of {cap}")]
    StepCapExceeded { cap: usize },

    #[error("invalid myopic schedule: {0}")]
    ScheduleInvalid(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cannot merge results from different configurations: {0}")]
    MixedConfig(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn summarize(v: &[Violation]) -> String {
    let mut s = v.iter().take(3).map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
    if v.len() > 3 {
        s.push_str("; ...");
    }
    s
}

impl Error {
    /// Process exit code used by the CLI: 2 validation, 4 budget/cap, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ValidationFailed(_) | Error::Parse { .. } => 2,
            Error::BudgetExceeded { .. } | Error::StepCapExceeded { .. } | Error::MaxRestartsExceeded { .. } => 4,
            _ => 3,
        }
    }
}
