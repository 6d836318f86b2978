//! Measurement of the excitation number modulo 2^ell.
//!
//! The circuit attaches `ell` counting ancillas, kicks back phases
//! e^{2πi(N_e - m)/2^x} controlled on ancilla x (each kick is a controlled
//! product of the fan-out form), applies an inverse QFT to the ancillas and
//! reads them out. Outcome j means the excitation number is ≡ j + m
//! (mod 2^ell); the post-state equals the brute-force sector projection.
//!
//! Also here: the parallel constant-depth variant trading depth for ancillas,
//! and the partial sign flip F_phi^[ell; m] (a fully unitary composite, no
//! measurements) used by the amplitude-amplification scheme.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::fanout::{run_fanout, FanoutPlan, PlannedGate};
use crate::gates;
use crate::ledger::{LayerEvent, ResourceLedger};
use crate::state::{site_mask, Basis, MeasurementRecord, StateVector};

/// How controlled phase kicks are executed: `Protocol` runs the full fan-out
/// circuit with LOCC on per-site ancillas; `Fast` applies the same unitary as
/// a direct controlled diagonal. Both are charged identically and must agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Fast,
    Protocol,
}

#[derive(Clone, Copy, Debug)]
pub enum Readout {
    Sample,
    Postselect(usize),
}

/// Spec for one modular measurement: which qubits count as sites, how many
/// counting ancillas, and the offset m subtracted inside the phase kicks.
#[derive(Clone, Debug)]
pub struct ModularMeasurementSpec {
    pub sites: Vec<usize>,
    pub ell: usize,
    pub offset: usize,
}

impl ModularMeasurementSpec {
    pub fn new(sites: Vec<usize>, ell: usize, offset: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(SimError::BadParameter("no sites to measure".into()));
        }
        let n = sites.len();
        let cap = exact_ell(n);
        if ell == 0 || ell > cap {
            return Err(SimError::BadParameter(format!(
                "ell = {ell} outside 1..={cap} for {n} sites"
            )));
        }
        if offset > n {
            return Err(SimError::BadParameter(format!(
                "offset {offset} exceeds site count {n}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if !sites.iter().all(|&s| seen.insert(s)) {
            return Err(SimError::BadParameter("duplicate sites".into()));
        }
        Ok(Self { sites, ell, offset })
    }

    pub fn modulus(&self) -> usize {
        1 << self.ell
    }
}

/// Ancilla count at which the modular measurement resolves the excitation
/// number exactly: ceil(log2(n + 1)).
pub fn exact_ell(n_sites: usize) -> usize {
    let mut ell = 0;
    while (1usize << ell) < n_sites + 1 {
        ell += 1;
    }
    ell.max(1)
}

/// One phase kick: ancilla of rank x controls e^{2πi(N_e - m)/2^x} on the
/// sites. Powers compose as U(x) = U(ell)^{2^{ell-x}}.
#[derive(Clone, Copy, Debug)]
pub struct PhaseKick {
    pub rank: usize,
    pub offset: usize,
}

impl PhaseKick {
    pub fn angle_per_excitation(&self) -> f64 {
        2.0 * PI / (1u64 << self.rank) as f64
    }

    /// Diagonal factor for a given excitation count.
    pub fn factor(&self, weight: usize) -> Complex64 {
        Complex64::from_polar(
            1.0,
            self.angle_per_excitation() * (weight as f64 - self.offset as f64),
        )
    }

    /// Per-site branch-1 unitary diag(1, e^{2πi/2^x}).
    pub fn site_unitary(&self) -> nalgebra::Matrix2<Complex64> {
        gates::phase(self.angle_per_excitation())
    }

    /// Scalar e^{-2πi m/2^x} folded into one site's branch-1 unitary.
    pub fn offset_scalar(&self) -> Complex64 {
        Complex64::from_polar(1.0, -self.angle_per_excitation() * self.offset as f64)
    }
}

#[derive(Clone, Debug)]
pub struct ModularOutcome {
    pub outcome: usize,
    pub probability: f64,
    pub state: StateVector,
    pub record: MeasurementRecord,
    pub ledger: ResourceLedger,
}

/// Run the modular measurement. The returned state lives on the same register
/// as the input; ancillas are attached and discarded internally.
pub fn measure_excitations_mod<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &ModularMeasurementSpec,
    exec: Execution,
    readout: Readout,
    rng: &mut R,
) -> Result<ModularOutcome> {
    let mut branches = run_modular(state, spec, exec, readout, rng)?;
    debug_assert_eq!(branches.len(), 1);
    Ok(branches.pop().expect("one branch"))
}

/// All readout branches with nonzero weight, sharing one pre-measurement
/// pass. Used for distribution-level equivalence checks.
pub fn modular_branches<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &ModularMeasurementSpec,
    exec: Execution,
    rng: &mut R,
) -> Result<Vec<ModularOutcome>> {
    run_modular(state, spec, exec, ReadoutPlan::AllBranches, rng)
}

enum ReadoutPlan {
    One(Readout),
    AllBranches,
}

impl From<Readout> for ReadoutPlan {
    fn from(r: Readout) -> Self {
        ReadoutPlan::One(r)
    }
}

fn run_modular<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &ModularMeasurementSpec,
    exec: Execution,
    readout: impl Into<ReadoutPlan>,
    rng: &mut R,
) -> Result<Vec<ModularOutcome>> {
    let readout = readout.into();
    for &s in &spec.sites {
        if s >= state.n_qubits() {
            return Err(SimError::BadTargets(format!("site {s} out of range")));
        }
    }
    let base_n = state.n_qubits();
    let n = spec.sites.len();
    let ell = spec.ell;
    let helpers_at = base_n;
    let n_helpers = if exec == Execution::Protocol { n } else { 0 };
    let extras_at = base_n + n_helpers;

    let mut ledger = ResourceLedger::new();
    ledger.ancillas_per_site = 1;
    ledger.extra_ancillas = ell as u64;
    let mut record = MeasurementRecord::new();

    let mut st = state.tensor_zeros(n_helpers + ell)?;
    let extra = |x: usize| extras_at + (x - 1);

    ledger.unitary_layer(
        "hadamard on counting ancillas",
        (1..=ell).map(|x| vec![extra(x)]).collect(),
    );
    for x in 1..=ell {
        st = st.apply_single(extra(x), &gates::hadamard());
    }

    for x in 1..=ell {
        let kick = PhaseKick {
            rank: x,
            offset: spec.offset,
        };
        st = apply_kick(
            &st,
            &kick,
            &spec.sites,
            extra(x),
            helpers_at,
            exec,
            &mut ledger,
            &mut record,
            rng,
        )?;
    }

    // Inverse QFT with ancilla rank 1 holding the most significant bit.
    let qft_targets: Vec<usize> = (1..=ell).rev().map(extra).collect();
    st = st.apply_unitary(&qft_targets, &gates::inverse_qft(ell))?;
    ledger.charge_qft(ell);

    ledger.locc_step("counting ancilla readout and reset", ell);

    let finish = |mut st: StateVector,
                  j: usize,
                  prob: f64,
                  rec: MeasurementRecord,
                  ledger: ResourceLedger|
     -> Result<ModularOutcome> {
        // Reset measured ancillas to |0> and detach everything appended.
        for x in 1..=ell {
            if (j >> (ell - x)) & 1 == 1 {
                st = st.apply_single(extra(x), &gates::pauli_x());
            }
        }
        for q in (base_n..base_n + n_helpers + ell).rev() {
            st = st.discard_qubit(q, 0)?;
        }
        Ok(ModularOutcome {
            outcome: j,
            probability: prob,
            state: st,
            record: rec,
            ledger,
        })
    };

    let measure_j = |st: &StateVector, j: usize| -> Result<(StateVector, f64, MeasurementRecord)> {
        let mut cur = st.clone();
        let mut prob = 1.0;
        let mut rec = record.clone();
        for x in 1..=ell {
            let bit = ((j >> (ell - x)) & 1) as u8;
            let m = cur.measure_postselect(extra(x), Basis::Z, bit)?;
            rec.push(extra(x), Basis::Z, bit, m.probability);
            prob *= m.probability;
            cur = m.state;
        }
        Ok((cur, prob, rec))
    };

    match readout {
        ReadoutPlan::One(Readout::Sample) => {
            let mut cur = st;
            let mut prob = 1.0;
            let mut j = 0usize;
            for x in 1..=ell {
                let m = cur.measure_sample(extra(x), Basis::Z, rng);
                record.push(extra(x), Basis::Z, m.outcome, m.probability);
                prob *= m.probability;
                j = (j << 1) | m.outcome as usize;
                cur = m.state;
            }
            Ok(vec![finish(cur, j, prob, record, ledger)?])
        }
        ReadoutPlan::One(Readout::Postselect(j)) => {
            if j >= spec.modulus() {
                return Err(SimError::BadParameter(format!(
                    "outcome {j} outside modulus {}",
                    spec.modulus()
                )));
            }
            let (cur, prob, rec) = measure_j(&st, j)?;
            Ok(vec![finish(cur, j, prob, rec, ledger)?])
        }
        ReadoutPlan::AllBranches => {
            let mut out = Vec::new();
            for j in 0..spec.modulus() {
                match measure_j(&st, j) {
                    Ok((cur, prob, rec)) => {
                        out.push(finish(cur, j, prob, rec, ledger.clone())?);
                    }
                    Err(SimError::ZeroProbabilityBranch(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        }
    }
}

/// One controlled phase kick, in either execution mode, charged identically
/// (the six fan-out events).
#[allow(clippy::too_many_arguments)]
fn apply_kick<R: Rng + ?Sized>(
    st: &StateVector,
    kick: &PhaseKick,
    sites: &[usize],
    control: usize,
    helpers_at: usize,
    exec: Execution,
    ledger: &mut ResourceLedger,
    record: &mut MeasurementRecord,
    rng: &mut R,
) -> Result<StateVector> {
    match exec {
        Execution::Fast => {
            let mask = site_mask(sites);
            let cbit = 1usize << control;
            let phase = kick.angle_per_excitation();
            let m = kick.offset as f64;
            let out = st.apply_diagonal(|idx| {
                if idx & cbit != 0 {
                    Complex64::from_polar(1.0, phase * ((idx & mask).count_ones() as f64 - m))
                } else {
                    Complex64::new(1.0, 0.0)
                }
            });
            charge_fanout_aggregate(ledger, sites.len() + 1, sites.len());
            Ok(out)
        }
        Execution::Protocol => {
            let site_u = kick.site_unitary();
            let gates: Vec<PlannedGate> = sites
                .iter()
                .enumerate()
                .map(|(i, &target)| {
                    let mut u1 = site_u;
                    if i == 0 {
                        u1 *= kick.offset_scalar();
                    }
                    PlannedGate {
                        member: i + 1,
                        target,
                        u0: gates::identity2(),
                        u1,
                    }
                })
                .collect();
            let plan = FanoutPlan {
                control,
                helpers: (0..sites.len()).map(|i| helpers_at + i).collect(),
                gates,
            };
            let out = run_fanout(st, &plan, rng)?;
            record.extend(&out.record);
            ledger.absorb(out.ledger);
            Ok(out.state)
        }
    }
}

/// The six depth events of one fan-out execution, as aggregate charges (used
/// when the kick is executed on the fast path so that both paths cost the
/// same).
pub(crate) fn charge_fanout_aggregate(
    ledger: &mut ResourceLedger,
    chain_len: usize,
    n_gates: usize,
) {
    let bells = chain_len.saturating_sub(1) / 2;
    ledger
        .record(LayerEvent::aggregate_layer("entangle ancilla pairs", bells))
        .unwrap();
    ledger
        .record(LayerEvent::aggregate_layer(
            "cnot ladder",
            chain_len.saturating_sub(1) / 2,
        ))
        .unwrap();
    ledger.locc_step(
        "measure even ancillas, parity corrections, reset",
        chain_len / 2,
    );
    ledger
        .record(LayerEvent::aggregate_layer("cnot ladder", chain_len / 2))
        .unwrap();
    ledger
        .record(LayerEvent::aggregate_layer(
            "controlled branch gates",
            n_gates,
        ))
        .unwrap();
    ledger.locc_step(
        "x-basis ancilla measurement, parity correction on control",
        chain_len,
    );
}

/// Depth/ancilla charges of the modular measurement alone, without running
/// it: one Hadamard layer, ell fan-out kick rounds, the linear-depth inverse
/// QFT, and the readout LOCC step. Lets resource tables be produced for
/// registers too large to simulate.
pub fn modular_measurement_ledger(n_sites: usize, ell: usize) -> ResourceLedger {
    let mut ledger = ResourceLedger::new();
    ledger.ancillas_per_site = 1;
    ledger.extra_ancillas = ell as u64;
    ledger
        .record(LayerEvent::aggregate_layer(
            "hadamard on counting ancillas",
            ell,
        ))
        .unwrap();
    for _ in 0..ell {
        charge_fanout_aggregate(&mut ledger, n_sites + 1, n_sites);
    }
    ledger.charge_qft(ell);
    ledger.locc_step("counting ancilla readout and reset", ell);
    ledger
}

// ---------------------------------------------------------------------------
// Parallel variant: constant depth, O(ell) ancillas per site.

#[derive(Clone, Copy, Debug)]
pub enum ParallelReadout {
    Sample,
    PostselectSuccess,
}

#[derive(Clone, Debug)]
pub struct ParallelOutcome {
    pub success: bool,
    /// Probability of the observed outcome string (for the success branch this
    /// is exactly the reference projector weight).
    pub probability: f64,
    pub state: StateVector,
    pub ledger: ResourceLedger,
}

/// Depth/ancilla charges of the parallel measurement; constant depth,
/// `ell` ancillas per site, `ell` counting ancillas.
pub fn parallel_measurement_ledger(n_sites: usize, ell: usize) -> ResourceLedger {
    let mut ledger = ResourceLedger::new();
    ledger.ancillas_per_site = ell as u64;
    ledger.extra_ancillas = ell as u64;
    // Fan-out copy of every site into ell-1 ancillas (layer, locc, layer).
    ledger
        .record(LayerEvent::aggregate_layer(
            "fan-out copy",
            n_sites * (ell - 1),
        ))
        .unwrap();
    ledger.locc_step("fan-out copy corrections", n_sites * (ell - 1));
    ledger
        .record(LayerEvent::aggregate_layer(
            "fan-out copy",
            n_sites * (ell - 1),
        ))
        .unwrap();
    ledger.unitary_layer("hadamard on counting ancillas", Vec::new());
    // All ell controlled products run in parallel on disjoint copies: one
    // six-event fan-out round for the whole layer.
    charge_fanout_aggregate(&mut ledger, n_sites + 1, n_sites * ell);
    // Uncopy.
    ledger
        .record(LayerEvent::aggregate_layer(
            "fan-out uncopy",
            n_sites * (ell - 1),
        ))
        .unwrap();
    ledger.locc_step("fan-out uncopy corrections", n_sites * (ell - 1));
    ledger
        .record(LayerEvent::aggregate_layer(
            "fan-out uncopy",
            n_sites * (ell - 1),
        ))
        .unwrap();
    ledger.unitary_layer("hadamard on counting ancillas", Vec::new());
    ledger.locc_step("counting ancilla readout", ell);
    ledger
}

/// Parallel modular measurement: succeeds when all counting ancillas read 0,
/// which projects onto excitation number ≡ target (mod 2^ell) with exactly
/// the reference weight. Failure branches are returned as-is (they are not
/// sector projections).
pub fn measure_excitations_parallel<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &ModularMeasurementSpec,
    target: usize,
    readout: ParallelReadout,
    rng: &mut R,
) -> Result<ParallelOutcome> {
    let base_n = state.n_qubits();
    let n = spec.sites.len();
    let ell = spec.ell;
    if target >= spec.modulus() {
        return Err(SimError::BadParameter(format!(
            "target {target} outside modulus {}",
            spec.modulus()
        )));
    }
    // Registers: ell-1 copies of every site, then ell counting ancillas.
    let copies = n * (ell - 1);
    let mut st = state.tensor_zeros(copies + ell)?;
    let copy_qubit = |x: usize, i: usize| base_n + (x - 2) * n + i;
    let counter = |x: usize| base_n + copies + (x - 1);

    let ledger = parallel_measurement_ledger(n, ell);

    // Copy out.
    for (i, &s) in spec.sites.iter().enumerate() {
        for x in 2..=ell {
            st = st.apply_controlled_single(s, copy_qubit(x, i), &gates::pauli_x());
        }
    }
    for x in 1..=ell {
        st = st.apply_single(counter(x), &gates::hadamard());
    }
    // Parallel kicks: ancilla x controls the phase on copy x (copy 1 is the
    // system itself).
    for x in 1..=ell {
        let kick = PhaseKick {
            rank: x,
            offset: target,
        };
        let mask = if x == 1 {
            site_mask(&spec.sites)
        } else {
            site_mask(&(0..n).map(|i| copy_qubit(x, i)).collect::<Vec<_>>())
        };
        let cbit = 1usize << counter(x);
        let phase = kick.angle_per_excitation();
        let m = kick.offset as f64;
        st = st.apply_diagonal(|idx| {
            if idx & cbit != 0 {
                Complex64::from_polar(1.0, phase * ((idx & mask).count_ones() as f64 - m))
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
    }
    // Uncopy.
    for (i, &s) in spec.sites.iter().enumerate() {
        for x in 2..=ell {
            st = st.apply_controlled_single(s, copy_qubit(x, i), &gates::pauli_x());
        }
    }
    for x in 1..=ell {
        st = st.apply_single(counter(x), &gates::hadamard());
    }

    // Read the counting ancillas; success = all zeros.
    let mut probability = 1.0;
    let mut success = true;
    for x in 1..=ell {
        match readout {
            ParallelReadout::Sample => {
                let m = st.measure_sample(counter(x), Basis::Z, rng);
                probability *= m.probability;
                if m.outcome == 1 {
                    success = false;
                    st = m.state.apply_single(counter(x), &gates::pauli_x());
                } else {
                    st = m.state;
                }
            }
            ParallelReadout::PostselectSuccess => {
                let m = st.measure_postselect(counter(x), Basis::Z, 0)?;
                probability *= m.probability;
                st = m.state;
            }
        }
    }
    for q in (base_n..base_n + copies + ell).rev() {
        st = st.discard_qubit(q, 0)?;
    }
    Ok(ParallelOutcome {
        success,
        probability,
        state: st,
        ledger,
    })
}

// ---------------------------------------------------------------------------
// Partial sign flip.

/// F_phi^[ell; m]: multiplies e^{i·phi} onto basis states whose excitation
/// count satisfies (N_e - m) ≡ 0 (mod 2^ell), identity otherwise. Implemented
/// as W† · (phase on the all-zero ancilla string) · W with W the phase-kick +
/// inverse-QFT compound; fully unitary, no measurements, ancillas returned to
/// |0> exactly.
pub fn partial_sign_flip<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &ModularMeasurementSpec,
    phi: f64,
    exec: Execution,
    rng: &mut R,
) -> Result<(StateVector, ResourceLedger)> {
    let base_n = state.n_qubits();
    let n = spec.sites.len();
    let ell = spec.ell;
    let n_helpers = if exec == Execution::Protocol { n } else { 0 };
    let extras_at = base_n + n_helpers;

    let mut ledger = ResourceLedger::new();
    ledger.ancillas_per_site = 1;
    ledger.extra_ancillas = ell as u64;
    let mut record = MeasurementRecord::new();

    let mut st = state.tensor_zeros(n_helpers + ell)?;
    let extra = |x: usize| extras_at + (x - 1);

    // W: H, kicks, inverse QFT.
    ledger.unitary_layer(
        "hadamard on counting ancillas",
        (1..=ell).map(|x| vec![extra(x)]).collect(),
    );
    for x in 1..=ell {
        st = st.apply_single(extra(x), &gates::hadamard());
    }
    for x in 1..=ell {
        let kick = PhaseKick {
            rank: x,
            offset: spec.offset,
        };
        st = apply_kick(
            &st,
            &kick,
            &spec.sites,
            extra(x),
            base_n,
            exec,
            &mut ledger,
            &mut record,
            rng,
        )?;
    }
    let qft_targets: Vec<usize> = (1..=ell).rev().map(extra).collect();
    st = st.apply_unitary(&qft_targets, &gates::inverse_qft(ell))?;
    ledger.charge_qft(ell);

    // Phase on the all-zero ancilla string; local circuit of depth ell^2.
    let anc_mask: usize = (1..=ell).map(|x| 1usize << extra(x)).sum();
    let phase = Complex64::from_polar(1.0, phi);
    st = st.apply_diagonal(|idx| {
        if idx & anc_mask == 0 {
            phase
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    for i in 0..ell * ell {
        ledger
            .record(LayerEvent::aggregate_layer(
                format!("zero-string phase, layer {}/{}", i + 1, ell * ell),
                1,
            ))
            .unwrap();
    }

    // W†: QFT, conjugate kicks, H.
    st = st.apply_unitary(&qft_targets, &gates::qft(ell))?;
    ledger.charge_qft(ell);
    for x in (1..=ell).rev() {
        let kick = PhaseKick {
            rank: x,
            offset: spec.offset,
        };
        st = apply_conjugate_kick(
            &st,
            &kick,
            &spec.sites,
            extra(x),
            base_n,
            exec,
            &mut ledger,
            &mut record,
            rng,
        )?;
    }
    ledger.unitary_layer(
        "hadamard on counting ancillas",
        (1..=ell).map(|x| vec![extra(x)]).collect(),
    );
    for x in 1..=ell {
        st = st.apply_single(extra(x), &gates::hadamard());
    }

    for q in (base_n..base_n + n_helpers + ell).rev() {
        st = st.discard_qubit(q, 0)?;
    }
    Ok((st, ledger))
}

#[allow(clippy::too_many_arguments)]
fn apply_conjugate_kick<R: Rng + ?Sized>(
    st: &StateVector,
    kick: &PhaseKick,
    sites: &[usize],
    control: usize,
    helpers_at: usize,
    exec: Execution,
    ledger: &mut ResourceLedger,
    record: &mut MeasurementRecord,
    rng: &mut R,
) -> Result<StateVector> {
    match exec {
        Execution::Fast => {
            let mask = site_mask(sites);
            let cbit = 1usize << control;
            let phase = kick.angle_per_excitation();
            let m = kick.offset as f64;
            let out = st.apply_diagonal(|idx| {
                if idx & cbit != 0 {
                    Complex64::from_polar(1.0, -phase * ((idx & mask).count_ones() as f64 - m))
                } else {
                    Complex64::new(1.0, 0.0)
                }
            });
            charge_fanout_aggregate(ledger, sites.len() + 1, sites.len());
            Ok(out)
        }
        Execution::Protocol => {
            let site_u = gates::phase(-kick.angle_per_excitation());
            let gates: Vec<PlannedGate> = sites
                .iter()
                .enumerate()
                .map(|(i, &target)| {
                    let mut u1 = site_u;
                    if i == 0 {
                        u1 *= kick.offset_scalar().conj();
                    }
                    PlannedGate {
                        member: i + 1,
                        target,
                        u0: gates::identity2(),
                        u1,
                    }
                })
                .collect();
            let plan = FanoutPlan {
                control,
                helpers: (0..sites.len()).map(|i| helpers_at + i).collect(),
                gates,
            };
            let out = run_fanout(st, &plan, rng)?;
            record.extend(&out.record);
            ledger.absorb(out.ledger);
            Ok(out.state)
        }
    }
}
