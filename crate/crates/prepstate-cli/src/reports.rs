//! JSON run reports. Field order is fixed by the struct, so identical
//! configurations with identical seeds serialize byte-identically apart from
//! the timestamp. The schema is documented in docs/report-schema.json.

use serde::Serialize;
use std::path::Path;

use prepstate::report::BoundCheck;
use prepstate::LedgerSummary;

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub timestamp_unix_ms: u128,
    pub ledger: LedgerSummary,
    pub infidelity: Option<f64>,
    pub success_probability: Option<f64>,
    pub repetitions: Option<u64>,
    pub bound_checks: Vec<BoundCheck>,
    pub notes: Vec<String>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub measurement_trace: Option<Vec<usize>>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        let timestamp_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config,
            seed,
            timestamp_unix_ms,
            ledger: LedgerSummary {
                depth: 0,
                unitary_layers: 0,
                locc_steps: 0,
                ancillas_per_site: 0,
                extra_ancillas: 0,
                repetitions: 0,
            },
            infidelity: None,
            success_probability: None,
            repetitions: None,
            bound_checks: Vec::new(),
            notes: Vec::new(),
            metrics: serde_json::Map::new(),
            measurement_trace: None,
        }
    }

    pub fn with_ledger(mut self, ledger: LedgerSummary) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn with_infidelity(mut self, infidelity: f64) -> Self {
        self.infidelity = Some(infidelity);
        self
    }

    pub fn with_success_probability(mut self, p: Option<f64>) -> Self {
        self.success_probability = p;
        self
    }

    pub fn with_repetitions(mut self, reps: u64) -> Self {
        self.repetitions = Some(reps);
        self
    }

    pub fn with_bound_checks(mut self, checks: Vec<BoundCheck>) -> Self {
        self.bound_checks = checks;
        self
    }

    pub fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes = notes;
        self
    }

    pub fn with_trace(mut self, trace: Vec<usize>) -> Self {
        self.measurement_trace = Some(trace);
        self
    }

    pub fn with_metrics(mut self, metrics: serde_json::Map<String, serde_json::Value>) -> Self {
        self.metrics = metrics;
        self
    }

    /// Print the report (and optionally write it to a file); returns the
    /// number of violated bounds for the exit-code decision.
    pub fn emit(&self, out: Option<&Path>) -> Result<usize, Box<dyn std::error::Error>> {
        let text = serde_json::to_string_pretty(self)?;
        println!("{text}");
        if let Some(path) = out {
            std::fs::write(path, format!("{text}\n"))?;
        }
        Ok(self.bound_checks.iter().filter(|b| !b.satisfied).count())
    }
}
