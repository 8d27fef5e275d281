use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A structural invariant of an input was violated.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A referenced bus, user or line does not exist.
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: usize },

    /// The request cannot be satisfied by the given data.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A linear solve or simplex run broke down numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("island containing bus {reference} is unbalanced by {mismatch} MW")]
    Unbalanced { reference: usize, mismatch: f64 },

    #[error("cascade did not stabilize within {rounds} rounds")]
    CascadeDidNotTerminate { rounds: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
