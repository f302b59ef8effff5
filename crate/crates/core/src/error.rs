use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("two-point function diverges: the p = 0 mode requires mu > 0")]
    DivergentMode,

    #[error("configuration index capacity exceeded: N^{m} does not fit in 64 bits (N = {n})")]
    Capacity { n: usize, m: usize },

    #[error("malformed configuration index {0}")]
    MalformedIndex(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("sector with {0} particles is not supported (maximum 2)")]
    UnsupportedSector(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("two-particle amplitude grid is not symmetric (deviation {0:e})")]
    AsymmetricGrid(f64),

    #[error("exact free evolution requested with non-zero coupling")]
    InteractingFreeEvolution,

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("configuration {config} sits on a wave-function node (|psi|^2 = {probability:e}) at t = {time}")]
    Node { config: u64, probability: f64, time: f64 },

    #[error("jump probability {probability} exceeds the per-step cap; substep required")]
    SubstepRequired { probability: f64 },

    #[error("substep limit reached at configuration {config}, t = {time}: dt * rate = {probability}")]
    SubstepExhausted { config: u64, time: f64, probability: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
