//! Report types shared by the preparation protocols and the CLI.

use serde::Serialize;

use crate::ledger::ResourceLedger;
use crate::state::StateVector;

/// Direction of a bound comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// satisfied iff lhs <= rhs
    AtMost,
    /// satisfied iff lhs >= rhs
    AtLeast,
}

/// One checked inequality: the measured quantity on the left, the guaranteed
/// bound on the right.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            kind: BoundKind::AtMost,
            lhs,
            rhs,
            satisfied: lhs <= rhs,
        }
    }

    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            kind: BoundKind::AtLeast,
            lhs,
            rhs,
            satisfied: lhs >= rhs,
        }
    }
}

/// Outcome of one preparation protocol run: the prepared state, how far it is
/// from the exact target, the analytic acceptance probability, the resource
/// ledger for a single trial, and the checked bounds.
#[derive(Clone, Debug)]
pub struct PreparationReport {
    pub final_state: StateVector,
    pub infidelity: f64,
    /// Analytic branch weight of the accepting outcome, where applicable.
    pub success_probability: Option<f64>,
    pub repetitions_used: u64,
    pub succeeded: bool,
    pub ledger: ResourceLedger,
    pub bound_checks: Vec<BoundCheck>,
    /// Measured outcome per trial (protocol-specific encoding).
    pub trial_outcomes: Vec<usize>,
    pub notes: Vec<String>,
}

impl PreparationReport {
    pub fn all_bounds_hold(&self) -> bool {
        self.bound_checks.iter().all(|b| b.satisfied)
    }
}
