//! Statevector simulation of measurement-assisted preparation of many-body
//! states (Dicke and W states, XX-chain eigenstates, excitation ladders),
//! with exact resource accounting for depth, ancillas, and repetitions.
//!
//! The crate is organized around a dense [`state::StateVector`] substrate.
//! Protocol modules build explicit circuits with local operations and
//! classical communication (LOCC) on top of it, and every circuit
//! implementation ships with an independent brute-force oracle it is checked
//! against.

pub mod amplitude;
pub mod bounds;
pub mod dicke;
pub mod error;
pub mod excitation;
pub mod fanout;
pub mod gates;
pub mod ladder;
pub mod layout;
pub mod ledger;
pub mod report;
pub mod state;
pub mod xx_chain;

pub use error::{Result, SimError};
pub use layout::RegisterLayout;
pub use ledger::{LayerEvent, LayerKind, LedgerSummary, ResourceLedger};
pub use state::{Basis, Measured, MeasurementRecord, StateVector};
