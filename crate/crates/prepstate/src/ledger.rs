//! Resource accounting: circuit depth counted as unitary layers plus LOCC
//! steps, ancilla counts, and repetitions.

use serde::Serialize;

use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    UnitaryLayer,
    LoccStep,
}

/// One depth event. A unitary layer may declare its gate target groups
/// (singles or pairs); the recorder validates that the groups are disjoint.
/// Aggregate charges (e.g. a QFT counted as several layers) declare only a
/// gate count.
#[derive(Clone, Debug, Serialize)]
pub struct LayerEvent {
    pub kind: LayerKind,
    pub description: String,
    pub targets: Vec<Vec<usize>>,
    pub gate_count: usize,
}

impl LayerEvent {
    pub fn unitary_layer(description: impl Into<String>, targets: Vec<Vec<usize>>) -> Self {
        let gate_count = targets.len();
        Self {
            kind: LayerKind::UnitaryLayer,
            description: description.into(),
            targets,
            gate_count,
        }
    }

    pub fn aggregate_layer(description: impl Into<String>, gate_count: usize) -> Self {
        Self {
            kind: LayerKind::UnitaryLayer,
            description: description.into(),
            targets: Vec::new(),
            gate_count,
        }
    }

    pub fn locc_step(description: impl Into<String>, gate_count: usize) -> Self {
        Self {
            kind: LayerKind::LoccStep,
            description: description.into(),
            targets: Vec::new(),
            gate_count,
        }
    }
}

/// Resource ledger for one protocol run. `depth` is always
/// `unitary_layers + locc_steps`; repetitions are counted separately.
#[derive(Clone, Debug, Default)]
pub struct ResourceLedger {
    unitary_layers: u64,
    locc_steps: u64,
    pub ancillas_per_site: u64,
    pub extra_ancillas: u64,
    pub repetitions: u64,
    trace: Vec<LayerEvent>,
}

/// Serialized form exposed through CLI reports.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerSummary {
    pub depth: u64,
    pub unitary_layers: u64,
    pub locc_steps: u64,
    pub ancillas_per_site: u64,
    pub extra_ancillas: u64,
    pub repetitions: u64,
}

impl ResourceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn depth(&self) -> u64 {
        self.unitary_layers + self.locc_steps
    }

    pub fn unitary_layers(&self) -> u64 {
        self.unitary_layers
    }

    pub fn locc_steps(&self) -> u64 {
        self.locc_steps
    }

    pub fn trace(&self) -> &[LayerEvent] {
        &self.trace
    }

    /// Record one depth event. Unitary layers with declared targets must act
    /// on disjoint singles or pairs.
    pub fn record(&mut self, event: LayerEvent) -> Result<()> {
        if event.kind == LayerKind::UnitaryLayer && !event.targets.is_empty() {
            let mut seen = std::collections::HashSet::new();
            for group in &event.targets {
                if group.is_empty() || group.len() > 2 {
                    return Err(SimError::BadLayerEvent(format!(
                        "gate group of {} qubits in layer '{}'",
                        group.len(),
                        event.description
                    )));
                }
                for &q in group {
                    if !seen.insert(q) {
                        return Err(SimError::BadLayerEvent(format!(
                            "qubit {q} targeted twice within layer '{}'",
                            event.description
                        )));
                    }
                }
            }
        }
        match event.kind {
            LayerKind::UnitaryLayer => self.unitary_layers += 1,
            LayerKind::LoccStep => self.locc_steps += 1,
        }
        self.trace.push(event);
        Ok(())
    }

    /// Convenience: record a validated unitary layer.
    pub fn unitary_layer(&mut self, description: impl Into<String>, targets: Vec<Vec<usize>>) {
        self.record(LayerEvent::unitary_layer(description, targets))
            .expect("invalid unitary layer");
    }

    /// Convenience: record an LOCC step (measurements + classical processing
    /// + conditioned corrections count as one step).
    pub fn locc_step(&mut self, description: impl Into<String>, gate_count: usize) {
        self.record(LayerEvent::locc_step(description, gate_count))
            .expect("locc step");
    }

    /// Charge an inverse QFT on `ell` ancillas as `ell` unitary layers (the
    /// linear-depth construction), regardless of how it is executed
    /// numerically.
    pub fn charge_qft(&mut self, ell: usize) {
        for i in 0..ell {
            self.record(LayerEvent::aggregate_layer(
                format!("qft layer {}/{ell}", i + 1),
                ell,
            ))
            .expect("qft layer");
        }
    }

    /// Fold a sub-protocol's events and ancilla requirements into this ledger.
    pub fn absorb(&mut self, other: ResourceLedger) {
        self.unitary_layers += other.unitary_layers;
        self.locc_steps += other.locc_steps;
        self.ancillas_per_site = self.ancillas_per_site.max(other.ancillas_per_site);
        self.extra_ancillas = self.extra_ancillas.max(other.extra_ancillas);
        self.trace.extend(other.trace);
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            depth: self.depth(),
            unitary_layers: self.unitary_layers,
            locc_steps: self.locc_steps,
            ancillas_per_site: self.ancillas_per_site,
            extra_ancillas: self.extra_ancillas,
            repetitions: self.repetitions,
        }
    }
}
