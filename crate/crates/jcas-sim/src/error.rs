use thiserror::Error;

/// Error type shared by every layer of the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid or inconsistent configuration (bad parameter values, infeasible
    /// spawn counts, dimension mismatches between checkpoint and config).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller violated the environment's episodic protocol (stepping a
    /// finished episode, wrong action count, non-finite action components).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Training produced a non-finite loss or gradient; the update was aborted.
    #[error("training error: {0}")]
    Training(String),

    /// A checkpoint file could not be read, parsed, or validated.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
