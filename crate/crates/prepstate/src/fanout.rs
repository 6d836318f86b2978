//! Constant-depth implementation of controlled product unitaries
//!
//!   V = |0><0|_c ⊗ (⊗_j U_{0,j})  +  |1><1|_c ⊗ (⊗_j U_{1,j})
//!
//! via a GHZ-extended ancilla chain and two LOCC rounds, together with a
//! direct-matrix reference used for equivalence testing. The protocol is
//! deterministic: every measurement branch yields the same output once the
//! recorded Pauli corrections are applied, at depth exactly 6 (four unitary
//! layers + two LOCC steps) and one ancilla per site.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SimError};
use crate::gates;
use crate::layout::RegisterLayout;
use crate::ledger::ResourceLedger;
use crate::state::{Basis, MeasurementRecord, StateVector};

const UNITARITY_TOL: f64 = 1e-10;

/// Branch unitaries for the controlled product on N sites: `branch0[j]` acts
/// on site j when the control is |0>, `branch1[j]` when it is |1>.
#[derive(Clone, Debug)]
pub struct ControlledProductSpec {
    pub branch0: Vec<Matrix2<Complex64>>,
    pub branch1: Vec<Matrix2<Complex64>>,
}

impl ControlledProductSpec {
    pub fn new(branch0: Vec<Matrix2<Complex64>>, branch1: Vec<Matrix2<Complex64>>) -> Result<Self> {
        if branch0.is_empty() || branch0.len() != branch1.len() {
            return Err(SimError::BadParameter(format!(
                "branch lists of length {} and {}",
                branch0.len(),
                branch1.len()
            )));
        }
        for u in branch0.iter().chain(branch1.iter()) {
            let dev = unitary2_deviation(u);
            if dev > UNITARITY_TOL {
                return Err(SimError::NonUnitary(dev));
            }
        }
        Ok(Self { branch0, branch1 })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            branch0: vec![gates::identity2(); n],
            branch1: vec![gates::identity2(); n],
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            branch0: (0..n).map(|_| gates::random_unitary2(rng)).collect(),
            branch1: (0..n).map(|_| gates::random_unitary2(rng)).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.branch0.len()
    }
}

/// One local controlled gate in a fan-out plan: `member` 0 is the control
/// qubit itself, member i >= 1 is `helpers[i-1]`; the member qubit controls
/// (u0, u1) on `target`.
#[derive(Clone, Debug)]
pub struct PlannedGate {
    pub member: usize,
    pub target: usize,
    pub u0: Matrix2<Complex64>,
    pub u1: Matrix2<Complex64>,
}

/// The generalized fan-out plan: a control qubit, helper ancillas that get
/// GHZ-extended from it (and are returned to |0>), and member-local
/// controlled gates.
#[derive(Clone, Debug)]
pub struct FanoutPlan {
    pub control: usize,
    pub helpers: Vec<usize>,
    pub gates: Vec<PlannedGate>,
}

impl FanoutPlan {
    fn chain(&self) -> Vec<usize> {
        let mut c = Vec::with_capacity(1 + self.helpers.len());
        c.push(self.control);
        c.extend_from_slice(&self.helpers);
        c
    }

    fn validate(&self, state: &StateVector) -> Result<()> {
        let n = state.n_qubits();
        let chain = self.chain();
        let mut seen = std::collections::HashSet::new();
        for &q in &chain {
            if q >= n {
                return Err(SimError::BadTargets(format!(
                    "chain qubit {q} out of range"
                )));
            }
            if !seen.insert(q) {
                return Err(SimError::BadTargets(format!("chain qubit {q} repeated")));
            }
        }
        let mut members_used = std::collections::HashSet::new();
        for g in &self.gates {
            if g.member > self.helpers.len() {
                return Err(SimError::BadTargets(format!(
                    "gate member {} beyond chain of {}",
                    g.member,
                    1 + self.helpers.len()
                )));
            }
            if !members_used.insert(g.member) {
                return Err(SimError::BadTargets(format!(
                    "member {} controls two gates in one layer",
                    g.member
                )));
            }
            if g.target >= n || !seen.insert(g.target) {
                return Err(SimError::BadTargets(format!(
                    "gate target {} invalid or already in use",
                    g.target
                )));
            }
            for u in [&g.u0, &g.u1] {
                let dev = unitary2_deviation(u);
                if dev > UNITARITY_TOL {
                    return Err(SimError::NonUnitary(dev));
                }
            }
        }
        Ok(())
    }

    fn member_qubit(&self, member: usize) -> usize {
        if member == 0 {
            self.control
        } else {
            self.helpers[member - 1]
        }
    }
}

/// Result of one protocol run (one measurement branch).
#[derive(Clone, Debug)]
pub struct FanoutOutcome {
    pub state: StateVector,
    pub record: MeasurementRecord,
    pub ledger: ResourceLedger,
}

/// The six depth events of the protocol, computed from the plan alone. Also
/// used to charge fast-path executions identically.
pub fn fanout_ledger(plan: &FanoutPlan) -> ResourceLedger {
    let chain = plan.chain();
    let len = chain.len();
    let mut ledger = ResourceLedger::new();
    let bell: Vec<Vec<usize>> = bell_pairs(len)
        .map(|(a, b)| vec![chain[a - 1], chain[b - 1]])
        .collect();
    ledger.unitary_layer("entangle neighboring ancilla pairs", bell);
    let ladder_a: Vec<Vec<usize>> = cnot_pairs(len, false)
        .map(|(a, b)| vec![chain[a - 1], chain[b - 1]])
        .collect();
    ledger.unitary_layer("cnot ladder", ladder_a);
    let n_even = len / 2;
    ledger.locc_step(
        "measure even ancillas, parity corrections, reset",
        2 * n_even + len.saturating_sub(2).div_ceil(2),
    );
    let ladder_b: Vec<Vec<usize>> = cnot_pairs(len, true)
        .map(|(a, b)| vec![chain[a - 1], chain[b - 1]])
        .collect();
    ledger.unitary_layer("cnot ladder", ladder_b);
    let ctl: Vec<Vec<usize>> = plan
        .gates
        .iter()
        .map(|g| vec![g.target, plan.member_qubit(g.member)])
        .collect();
    ledger.unitary_layer("controlled branch gates", ctl);
    ledger.locc_step(
        "x-basis ancilla measurement, parity correction on control",
        len,
    );
    ledger.ancillas_per_site = 1;
    ledger
}

/// Direct-matrix reference: the exact controlled product applied as
/// control-target gates, no ancilla machinery, no measurements.
pub fn apply_fanout_reference(state: &StateVector, plan: &FanoutPlan) -> Result<StateVector> {
    plan.validate(state)?;
    let mut st = state.clone();
    for g in &plan.gates {
        st = st.apply_unitary(&[g.target, plan.control], &gates::controlled(&g.u0, &g.u1))?;
    }
    Ok(st)
}

/// Run the protocol, sampling both LOCC rounds from `rng`.
pub fn run_fanout<R: Rng + ?Sized>(
    state: &StateVector,
    plan: &FanoutPlan,
    rng: &mut R,
) -> Result<FanoutOutcome> {
    plan.validate(state)?;
    check_helpers_reset(state, plan)?;
    let chain = plan.chain();
    let mut record = MeasurementRecord::new();

    let st = phase_entangle(state, &chain);
    let mut alphas = Vec::new();
    let mut st = st;
    for pos in even_positions(chain.len()) {
        let m = st.measure_sample(chain[pos - 1], Basis::Z, rng);
        record.push(chain[pos - 1], Basis::Z, m.outcome, m.probability);
        alphas.push(m.outcome);
        st = m.state;
    }
    let mut st = phase_middle(&st, plan, &chain, &alphas)?;
    let mut betas = Vec::new();
    for pos in 2..=chain.len() {
        let m = st.measure_sample(chain[pos - 1], Basis::X, rng);
        record.push(chain[pos - 1], Basis::X, m.outcome, m.probability);
        betas.push(m.outcome);
        st = m.state;
    }
    let st = phase_final(&st, &chain, &betas);
    Ok(FanoutOutcome {
        state: st,
        record,
        ledger: fanout_ledger(plan),
    })
}

/// Enumerate every measurement branch (weights sum to 1; zero-weight branches
/// are skipped). Exhaustive enumeration is capped at 16 measured qubits.
pub fn enumerate_fanout(
    state: &StateVector,
    plan: &FanoutPlan,
) -> Result<Vec<(FanoutOutcome, f64)>> {
    plan.validate(state)?;
    check_helpers_reset(state, plan)?;
    let chain = plan.chain();
    let n_meas = chain.len() / 2 + (chain.len() - 1);
    if n_meas > 16 {
        return Err(SimError::BadParameter(format!(
            "exhaustive enumeration over {n_meas} measurements is above the cap"
        )));
    }
    let evens: Vec<usize> = even_positions(chain.len()).map(|p| chain[p - 1]).collect();
    let helpers: Vec<usize> = (2..=chain.len()).map(|p| chain[p - 1]).collect();

    let pre = phase_entangle(state, &chain);
    let mut results = Vec::new();
    for branch_a in enumerate_measurements(&pre, &evens, Basis::Z) {
        let st = phase_middle(&branch_a.state, plan, &chain, &branch_a.outcomes)?;
        for branch_b in enumerate_measurements(&st, &helpers, Basis::X) {
            let final_state = phase_final(&branch_b.state, &chain, &branch_b.outcomes);
            let mut record = branch_a.record.clone();
            record.extend(&branch_b.record);
            let weight = branch_a.weight * branch_b.weight;
            results.push((
                FanoutOutcome {
                    state: final_state,
                    record,
                    ledger: fanout_ledger(plan),
                },
                weight,
            ));
        }
    }
    Ok(results)
}

struct MeasuredBranch {
    outcomes: Vec<u8>,
    weight: f64,
    record: MeasurementRecord,
    state: StateVector,
}

fn enumerate_measurements(
    state: &StateVector,
    qubits: &[usize],
    basis: Basis,
) -> Vec<MeasuredBranch> {
    let mut branches = vec![MeasuredBranch {
        outcomes: Vec::new(),
        weight: 1.0,
        record: MeasurementRecord::new(),
        state: state.clone(),
    }];
    for &q in qubits {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for b in branches {
            for outcome in 0..2u8 {
                match b.state.measure_postselect(q, basis, outcome) {
                    Ok(m) => {
                        let mut outcomes = b.outcomes.clone();
                        outcomes.push(outcome);
                        let mut record = b.record.clone();
                        record.push(q, basis, outcome, m.probability);
                        next.push(MeasuredBranch {
                            outcomes,
                            weight: b.weight * m.probability,
                            record,
                            state: m.state,
                        });
                    }
                    Err(SimError::ZeroProbabilityBranch(_)) => {}
                    Err(e) => panic!("measurement enumeration failed: {e}"),
                }
            }
        }
        branches = next;
    }
    branches
}

/// Positions (1-based along the chain) measured during the first LOCC round.
fn even_positions(len: usize) -> impl Iterator<Item = usize> {
    (2..=len).step_by(2)
}

/// Bell pairs (2j, 2j+1) within the chain.
fn bell_pairs(len: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..)
        .map(|j| (2 * j, 2 * j + 1))
        .take_while(move |&(_, b)| b <= len)
}

/// CNOT pairs (2j-1, 2j); the pair touching the chain end joins only in the
/// second ladder.
fn cnot_pairs(len: usize, include_last: bool) -> impl Iterator<Item = (usize, usize)> {
    let cap = if include_last {
        len
    } else {
        len.saturating_sub(1)
    };
    (1..)
        .map(|j| (2 * j - 1, 2 * j))
        .take_while(move |&(_, b)| b <= cap)
}

fn phase_entangle(state: &StateVector, chain: &[usize]) -> StateVector {
    let mut st = state.clone();
    for (a, b) in bell_pairs(chain.len()) {
        let (qa, qb) = (chain[a - 1], chain[b - 1]);
        st = st
            .apply_single(qa, &gates::hadamard())
            .apply_controlled_single(qa, qb, &gates::pauli_x());
    }
    for (a, b) in cnot_pairs(chain.len(), false) {
        st = st.apply_controlled_single(chain[a - 1], chain[b - 1], &gates::pauli_x());
    }
    st
}

fn phase_middle(
    state: &StateVector,
    plan: &FanoutPlan,
    chain: &[usize],
    alphas: &[u8],
) -> Result<StateVector> {
    let mut st = state.clone();
    // Parity corrections on odd chain members, cumulative over measured evens.
    let even_pos: Vec<usize> = even_positions(chain.len()).collect();
    for k in (3..=chain.len()).step_by(2) {
        let parity: u8 = even_pos
            .iter()
            .zip(alphas)
            .filter(|(&pos, _)| pos < k)
            .map(|(_, &a)| a)
            .sum::<u8>()
            % 2;
        if parity == 1 {
            st = st.apply_single(chain[k - 1], &gates::pauli_x());
        }
    }
    // Decoupled even ancillas are rotated back to |0>.
    for (&pos, &a) in even_pos.iter().zip(alphas) {
        if a == 1 {
            st = st.apply_single(chain[pos - 1], &gates::pauli_x());
        }
    }
    for (a, b) in cnot_pairs(chain.len(), true) {
        st = st.apply_controlled_single(chain[a - 1], chain[b - 1], &gates::pauli_x());
    }
    for g in &plan.gates {
        st = st.apply_unitary(
            &[g.target, plan.member_qubit(g.member)],
            &gates::controlled(&g.u0, &g.u1),
        )?;
    }
    Ok(st)
}

fn phase_final(state: &StateVector, chain: &[usize], betas: &[u8]) -> StateVector {
    let mut st = state.clone();
    let mut parity = 0u8;
    for (pos, &b) in (2..=chain.len()).zip(betas) {
        parity ^= b;
        // The measured ancilla sits in |+> or |->; rotate it back to |0>.
        st = st.apply_single(chain[pos - 1], &gates::hadamard());
        if b == 1 {
            st = st.apply_single(chain[pos - 1], &gates::pauli_x());
        }
    }
    if parity == 1 {
        st = st.apply_single(chain[0], &gates::pauli_z());
    }
    st
}

fn check_helpers_reset(state: &StateVector, plan: &FanoutPlan) -> Result<()> {
    for &h in &plan.helpers {
        let stray = state.outcome_probability(h, Basis::Z, 1);
        if stray > 1e-12 {
            return Err(SimError::BadLayout(format!(
                "helper ancilla {h} is not in |0> (mass {stray:.3e})"
            )));
        }
    }
    Ok(())
}

fn unitary2_deviation(u: &Matrix2<Complex64>) -> f64 {
    let prod = u * u.adjoint();
    let mut dev: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let expect = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((prod[(r, c)] - Complex64::new(expect, 0.0)).norm());
        }
    }
    dev
}

// ---------------------------------------------------------------------------
// Layout-level wrappers for the N-site controlled product.

/// Plan for the N-site controlled product on a layout with one ancilla per
/// site: the site-0 ancilla is the control, the remaining site ancillas are
/// the GHZ helpers, and chain member j controls (U_{0,j}, U_{1,j}) on site j.
pub fn v_plan(layout: &RegisterLayout, spec: &ControlledProductSpec) -> Result<FanoutPlan> {
    let n = layout.n_sites();
    if spec.n_sites() != n {
        return Err(SimError::BadParameter(format!(
            "spec covers {} sites, layout has {n}",
            spec.n_sites()
        )));
    }
    if layout.ancillas_per_site() < 1 {
        return Err(SimError::BadLayout(
            "controlled product needs one ancilla per site".into(),
        ));
    }
    let control = layout.site_ancilla(0, 0);
    let helpers: Vec<usize> = (1..n).map(|j| layout.site_ancilla(j, 0)).collect();
    let gates: Vec<PlannedGate> = (0..n)
        .map(|j| PlannedGate {
            member: j,
            target: layout.site(j),
            u0: spec.branch0[j],
            u1: spec.branch1[j],
        })
        .collect();
    Ok(FanoutPlan {
        control,
        helpers,
        gates,
    })
}

/// Exact controlled product by direct matrix application (the test oracle).
pub fn apply_v_reference(
    state: &StateVector,
    layout: &RegisterLayout,
    spec: &ControlledProductSpec,
) -> Result<StateVector> {
    apply_fanout_reference(state, &v_plan(layout, spec)?)
}

/// The constant-depth protocol, sampling measurement outcomes.
pub fn apply_v_protocol<R: Rng + ?Sized>(
    state: &StateVector,
    layout: &RegisterLayout,
    spec: &ControlledProductSpec,
    rng: &mut R,
) -> Result<FanoutOutcome> {
    run_fanout(state, &v_plan(layout, spec)?, rng)
}

/// All measurement branches of the protocol; capped at 8 sites.
pub fn enumerate_v_protocol(
    state: &StateVector,
    layout: &RegisterLayout,
    spec: &ControlledProductSpec,
) -> Result<Vec<(FanoutOutcome, f64)>> {
    if layout.n_sites() > 8 {
        return Err(SimError::BadParameter(format!(
            "exhaustive branch enumeration capped at 8 sites, got {}",
            layout.n_sites()
        )));
    }
    enumerate_fanout(state, &v_plan(layout, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn embedded_input(n: usize) -> (RegisterLayout, StateVector) {
        let layout = RegisterLayout::contiguous(n, 1, 0);
        let st = StateVector::zero_state(layout.total_qubits()).unwrap();
        (layout, st)
    }

    #[test]
    fn identity_branches_leave_every_branch_unchanged() {
        let (layout, st) = embedded_input(4);
        let spec = ControlledProductSpec::identity(4);
        let branches = enumerate_v_protocol(&st, &layout, &spec).unwrap();
        let mut total = 0.0;
        for (b, w) in &branches {
            assert!((b.state.fidelity(&st).unwrap() - 1.0).abs() < 1e-10);
            total += w;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_control_applies_branch0() {
        let (layout, st) = embedded_input(3);
        let spec =
            ControlledProductSpec::new(vec![gates::pauli_x(); 3], vec![gates::identity2(); 3])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = apply_v_protocol(&st, &layout, &spec, &mut rng).unwrap();
        // Sites 0..3 all flipped to |1>, ancillas back to |0>.
        let expect = StateVector::basis_state(layout.total_qubits(), 0b111).unwrap();
        assert!((out.state.fidelity(&expect).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(out.ledger.depth(), 6);
    }

    #[test]
    fn plus_control_entangles_like_reference() {
        // Control in |+>, branch1 = Z per site, sites in |+...+>.
        let n = 4;
        let layout = RegisterLayout::contiguous(n, 1, 0);
        let mut st = StateVector::zero_state(layout.total_qubits()).unwrap();
        for j in 0..n {
            st = st.apply_single(layout.site(j), &gates::hadamard());
        }
        st = st.apply_single(layout.site_ancilla(0, 0), &gates::hadamard());
        let spec =
            ControlledProductSpec::new(vec![gates::identity2(); n], vec![gates::pauli_z(); n])
                .unwrap();
        let reference = apply_v_reference(&st, &layout, &spec).unwrap();
        for (branch, _) in enumerate_v_protocol(&st, &layout, &spec).unwrap() {
            assert!((branch.state.fidelity(&reference).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_branches_on_single_excitation_state_match_reference() {
        // Branch-1 unitary diag(1, e^{i*pi}) per site; control in |+>, sites
        // in the single-excitation uniform state.
        let n = 3;
        let layout = RegisterLayout::contiguous(n, 1, 0);
        let w = crate::dicke::make_dicke_state(n, 1).unwrap();
        let st = w
            .tensor_zeros(n)
            .unwrap()
            .apply_single(layout.site_ancilla(0, 0), &gates::hadamard());
        let spec = ControlledProductSpec::new(
            vec![gates::identity2(); n],
            vec![gates::phase(std::f64::consts::PI); n],
        )
        .unwrap();
        let reference = apply_v_reference(&st, &layout, &spec).unwrap();
        for (branch, _) in enumerate_v_protocol(&st, &layout, &spec).unwrap() {
            assert!((branch.state.fidelity(&reference).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn every_branch_matches_reference_for_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in 2..=5usize {
            let layout = RegisterLayout::contiguous(n, 1, 0);
            for _ in 0..6 {
                let mut st = StateVector::zero_state(layout.total_qubits()).unwrap();
                // Random product input over sites plus superposed control.
                for j in 0..n {
                    st = st.apply_single(layout.site(j), &gates::random_unitary2(&mut rng));
                }
                st = st.apply_single(layout.site_ancilla(0, 0), &gates::random_unitary2(&mut rng));
                let spec = ControlledProductSpec::random(n, &mut rng);
                let reference = apply_v_reference(&st, &layout, &spec).unwrap();
                let branches = enumerate_v_protocol(&st, &layout, &spec).unwrap();
                let mut total = 0.0;
                for (branch, w) in &branches {
                    total += w;
                    let fid = branch.state.fidelity(&reference).unwrap();
                    assert!(
                        fid >= 1.0 - 1e-10,
                        "branch fidelity {fid} at n={n}, weight {w}"
                    );
                    // Non-control ancillas end in |0>.
                    for j in 1..n {
                        let p1 = branch.state.outcome_probability(
                            layout.site_ancilla(j, 0),
                            Basis::Z,
                            1,
                        );
                        assert!(p1 < 1e-10);
                    }
                    assert_eq!(branch.ledger.depth(), 6);
                    assert_eq!(branch.ledger.ancillas_per_site, 1);
                }
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampled_run_agrees_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layout = RegisterLayout::contiguous(6, 1, 0);
        let mut st = StateVector::zero_state(layout.total_qubits()).unwrap();
        st = st.apply_single(layout.site_ancilla(0, 0), &gates::hadamard());
        for j in 0..6 {
            st = st.apply_single(layout.site(j), &gates::random_unitary2(&mut rng));
        }
        let spec = ControlledProductSpec::random(6, &mut rng);
        let reference = apply_v_reference(&st, &layout, &spec).unwrap();
        for _ in 0..10 {
            let out = apply_v_protocol(&st, &layout, &spec, &mut rng).unwrap();
            assert!((out.state.fidelity(&reference).unwrap() - 1.0).abs() < 1e-10);
            assert!((out.record.branch_weight() - out.record.branch_weight()).abs() == 0.0);
        }
    }

    #[test]
    fn helper_not_in_zero_state_is_rejected() {
        let layout = RegisterLayout::contiguous(3, 1, 0);
        let st = StateVector::zero_state(layout.total_qubits())
            .unwrap()
            .apply_single(layout.site_ancilla(1, 0), &gates::pauli_x());
        let spec = ControlledProductSpec::identity(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(apply_v_protocol(&st, &layout, &spec, &mut rng).is_err());
    }

    #[test]
    fn layout_without_ancillas_is_rejected() {
        let layout = RegisterLayout::contiguous(3, 0, 0);
        let spec = ControlledProductSpec::identity(3);
        assert!(v_plan(&layout, &spec).is_err());
    }
}
