use thiserror::Error;

/// Errors produced by simulator and protocol operations.
#[derive(Debug, Error)]
pub enum SimError {
    /// A register would exceed the dense-simulation budget.
    #[error("register of {0} qubits exceeds the {max}-qubit simulation cap", max = crate::state::MAX_QUBITS)]
    RegisterTooLarge(usize),

    /// A matrix failed the unitarity check; carries the max deviation of u·u† from I.
    #[error("matrix is not unitary: max |u·u† - I| entry = {0:.3e}")]
    NonUnitary(f64),

    /// Duplicate or out-of-range qubit targets.
    #[error("invalid qubit targets: {0}")]
    BadTargets(String),

    /// State dimensions do not match.
    #[error("dimension mismatch: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),

    /// A projection or postselection onto a branch of (near-)zero weight.
    #[error("branch has probability {0:.3e}, below the postselection floor")]
    ZeroProbabilityBranch(f64),

    /// An invalid register layout (overlapping roles, gaps, ragged ancillas).
    #[error("invalid register layout: {0}")]
    BadLayout(String),

    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    /// A ledger event that violates layer structure.
    #[error("invalid layer event: {0}")]
    BadLayerEvent(String),

    /// An amplitude-amplification oracle failed validation on its subspace.
    #[error("oracle validation failed: {0}")]
    OracleValidation(String),

    /// A numerical routine failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Malformed coefficient input.
    #[error("coefficient parse error: {0}")]
    CoefficientParse(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
