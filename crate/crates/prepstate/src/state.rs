//! Dense statevector over a labeled qubit register.
//!
//! Qubit 0 is the least-significant bit of the basis index. All operations are
//! pure value transformations: they take a state by reference and return a new
//! one, so states can move freely between threads.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Result, SimError};

/// Hard cap on register size to keep dense simulation at desk scale.
pub const MAX_QUBITS: usize = 26;

/// Largest joint-target unitary accepted by [`StateVector::apply_unitary`].
pub const MAX_UNITARY_TARGETS: usize = 12;

const UNITARITY_TOL: f64 = 1e-10;
const ZERO_BRANCH_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    Z,
    X,
}

/// Outcome of a single-qubit projective measurement.
#[derive(Clone, Debug)]
pub struct Measured {
    pub outcome: u8,
    pub probability: f64,
    pub state: StateVector,
}

/// One measurement event: which qubit, which basis, what came out and with
/// what Born weight.
#[derive(Clone, Debug, Serialize)]
pub struct RecordEntry {
    pub qubit: usize,
    pub basis: Basis,
    pub outcome: u8,
    pub probability: f64,
}

/// Ordered log of measurement events within one protocol run. Probabilities
/// along a branch multiply to the branch weight.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MeasurementRecord {
    pub entries: Vec<RecordEntry>,
}

impl MeasurementRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, qubit: usize, basis: Basis, outcome: u8, probability: f64) {
        self.entries.push(RecordEntry {
            qubit,
            basis,
            outcome,
            probability,
        });
    }

    pub fn extend(&mut self, other: &MeasurementRecord) {
        self.entries.extend(other.entries.iter().cloned());
    }

    /// Product of the recorded outcome probabilities.
    pub fn branch_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).product()
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n_qubits`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Self::basis_state(n_qubits, 0)
    }

    /// Computational basis state with the given index (qubit 0 = LSB).
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        if index >= (1usize << n_qubits) {
            return Err(SimError::BadParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Build from raw amplitudes; must have power-of-two length and unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::BadParameter(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::BadParameter(format!(
                "amplitudes have norm {norm}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalized Gaussian-random state (for randomized checks).
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        check_register(n_qubits).expect("register too large");
        let mut amps: Vec<Complex64> = (0..1usize << n_qubits)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(SimError::DimensionMismatch(self.n_qubits, other.n_qubits));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |<self|other>|^2; 1 iff equal up to global phase.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// |1 - |<self|other>|^2|
    pub fn infidelity(&self, other: &StateVector) -> Result<f64> {
        Ok((1.0 - self.fidelity(other)?).abs())
    }

    /// Append `k` fresh qubits in |0>, at the top of the index space.
    pub fn tensor_zeros(&self, k: usize) -> Result<Self> {
        let n = self.n_qubits + k;
        check_register(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(Self { n_qubits: n, amps })
    }

    /// Remove a qubit known to be in the computational state `expected`.
    /// Errors if any amplitude mass sits on the other branch.
    pub fn discard_qubit(&self, qubit: usize, expected: u8) -> Result<Self> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let stray: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & bit != 0) as u8) != expected)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        if stray > 1e-12 {
            return Err(SimError::BadParameter(format!(
                "qubit {qubit} is not deterministically |{expected}>: stray mass {stray:.3e}"
            )));
        }
        let low = bit - 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() / 2];
        for (i, a) in amps.iter_mut().enumerate() {
            let src = (i & low) | ((i & !low) << 1) | if expected == 1 { bit } else { 0 };
            *a = self.amps[src];
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        Ok(Self {
            n_qubits: self.n_qubits - 1,
            amps,
        })
    }

    /// Apply a general unitary on up to [`MAX_UNITARY_TARGETS`] qubits. Bit `t`
    /// of the matrix sub-index addresses `targets[t]`. The matrix is checked
    /// for unitarity (u·u† = I within 1e-10) and duplicate targets rejected.
    pub fn apply_unitary(&self, targets: &[usize], u: &DMatrix<Complex64>) -> Result<Self> {
        let k = targets.len();
        if k == 0 || k > MAX_UNITARY_TARGETS {
            return Err(SimError::BadTargets(format!(
                "{k} targets (must be 1..={MAX_UNITARY_TARGETS})"
            )));
        }
        let mut mask = 0usize;
        for &t in targets {
            self.check_qubit(t)?;
            if mask & (1 << t) != 0 {
                return Err(SimError::BadTargets(format!("duplicate target {t}")));
            }
            mask |= 1 << t;
        }
        let dim = 1usize << k;
        if u.nrows() != dim || u.ncols() != dim {
            return Err(SimError::BadTargets(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                u.nrows(),
                u.ncols()
            )));
        }
        let dev = unitarity_deviation(u);
        if dev > UNITARITY_TOL {
            return Err(SimError::NonUnitary(dev));
        }

        // Scatter table: sub-index -> spread bits in the full register.
        let spread: Vec<usize> = (0..dim)
            .map(|sub| {
                targets
                    .iter()
                    .enumerate()
                    .map(|(t, &q)| ((sub >> t) & 1) << q)
                    .sum()
            })
            .collect();

        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for row in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in 0..dim {
                    acc += u[(row, col)] * self.amps[base | spread[col]];
                }
                out[base | spread[row]] = acc;
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }

    /// Unchecked fast path for a single-qubit unitary.
    pub fn apply_single(&self, qubit: usize, u: &Matrix2<Complex64>) -> Self {
        debug_assert!(qubit < self.n_qubits);
        let step = 1usize << qubit;
        let mut amps = self.amps.clone();
        for base in (0..amps.len()).step_by(2 * step) {
            for off in 0..step {
                let i = base + off;
                let j = i + step;
                let a = amps[i];
                let b = amps[j];
                amps[i] = u[(0, 0)] * a + u[(0, 1)] * b;
                amps[j] = u[(1, 0)] * a + u[(1, 1)] * b;
            }
        }
        Self {
            n_qubits: self.n_qubits,
            amps,
        }
    }

    /// Unchecked fast path: apply `u` on `target` where `control` is |1>.
    pub fn apply_controlled_single(
        &self,
        control: usize,
        target: usize,
        u: &Matrix2<Complex64>,
    ) -> Self {
        debug_assert!(control != target);
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        let mut amps = self.amps.clone();
        for i in 0..amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                let j = i | tbit;
                let a = amps[i];
                let b = amps[j];
                amps[i] = u[(0, 0)] * a + u[(0, 1)] * b;
                amps[j] = u[(1, 0)] * a + u[(1, 1)] * b;
            }
        }
        Self {
            n_qubits: self.n_qubits,
            amps,
        }
    }

    /// Multiply each basis amplitude by `f(index)`. Callers must supply
    /// unit-modulus factors; this is debug-asserted.
    pub fn apply_diagonal(&self, f: impl Fn(usize) -> Complex64) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let z = f(i);
                debug_assert!((z.norm() - 1.0).abs() < 1e-9, "non-unimodular diagonal");
                a * z
            })
            .collect();
        Self {
            n_qubits: self.n_qubits,
            amps,
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * z).collect(),
        }
    }

    /// Born probability of `outcome` when measuring `qubit` in `basis`.
    pub fn outcome_probability(&self, qubit: usize, basis: Basis, outcome: u8) -> f64 {
        let work = self.rotate_for(qubit, basis);
        let bit = 1usize << qubit;
        work.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & bit != 0) as u8) == outcome)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    /// Sample a projective measurement; the RNG is consumed in call order so
    /// full runs replay from a seed.
    pub fn measure_sample<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Measured {
        let work = self.rotate_for(qubit, basis);
        let p1 = work.z_probability_one(qubit);
        let outcome = u8::from(rng.random::<f64>() < p1);
        let probability = if outcome == 1 { p1 } else { 1.0 - p1 };
        let state = work.collapse_z(qubit, outcome).rotate_back(qubit, basis);
        Measured {
            outcome,
            probability,
            state,
        }
    }

    /// Force a measurement branch; errors when the branch weight is below
    /// 1e-14.
    pub fn measure_postselect(&self, qubit: usize, basis: Basis, outcome: u8) -> Result<Measured> {
        self.check_qubit(qubit)?;
        let work = self.rotate_for(qubit, basis);
        let p1 = work.z_probability_one(qubit);
        let probability = if outcome == 1 { p1 } else { 1.0 - p1 };
        if probability <= ZERO_BRANCH_FLOOR {
            return Err(SimError::ZeroProbabilityBranch(probability));
        }
        let state = work.collapse_z(qubit, outcome).rotate_back(qubit, basis);
        Ok(Measured {
            outcome,
            probability,
            state,
        })
    }

    /// Per-Hamming-weight Born weights over the given sites.
    pub fn excitation_weights(&self, sites: &[usize]) -> Vec<f64> {
        let mask = site_mask(sites);
        let mut w = vec![0.0; sites.len() + 1];
        for (i, a) in self.amps.iter().enumerate() {
            w[(i & mask).count_ones() as usize] += a.norm_sqr();
        }
        w
    }

    /// Reference projector for the modular excitation measurement: keeps basis
    /// states whose Hamming weight on `sites` is ≡ `residue` (mod `modulus`).
    /// Returns the Born weight and the normalized projected state. This is the
    /// brute-force oracle the circuit implementation is checked against.
    pub fn project_excitations_mod(
        &self,
        sites: &[usize],
        residue: usize,
        modulus: usize,
    ) -> Result<(f64, Self)> {
        if modulus == 0 || residue >= modulus {
            return Err(SimError::BadParameter(format!(
                "residue {residue} not in [0, {modulus})"
            )));
        }
        let mask = site_mask(sites);
        let mut weight = 0.0;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if (i & mask).count_ones() as usize % modulus == residue {
                weight += a.norm_sqr();
                amps[i] = *a;
            }
        }
        if weight <= ZERO_BRANCH_FLOOR {
            return Err(SimError::ZeroProbabilityBranch(weight));
        }
        let inv = 1.0 / weight.sqrt();
        for a in &mut amps {
            *a *= inv;
        }
        Ok((
            weight,
            Self {
                n_qubits: self.n_qubits,
                amps,
            },
        ))
    }

    fn rotate_for(&self, qubit: usize, basis: Basis) -> Self {
        match basis {
            Basis::Z => self.clone(),
            Basis::X => self.apply_single(qubit, &crate::gates::hadamard()),
        }
    }

    fn rotate_back(&self, qubit: usize, basis: Basis) -> Self {
        match basis {
            Basis::Z => self.clone(),
            Basis::X => self.apply_single(qubit, &crate::gates::hadamard()),
        }
    }

    fn z_probability_one(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    fn collapse_z(&self, qubit: usize, outcome: u8) -> Self {
        let bit = 1usize << qubit;
        let mut amps = self.amps.clone();
        let mut mass = 0.0;
        for (i, a) in amps.iter_mut().enumerate() {
            if ((i & bit != 0) as u8) == outcome {
                mass += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let inv = 1.0 / mass.sqrt();
        for a in &mut amps {
            *a *= inv;
        }
        Self {
            n_qubits: self.n_qubits,
            amps,
        }
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(SimError::BadTargets(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

pub(crate) fn site_mask(sites: &[usize]) -> usize {
    sites.iter().fold(0usize, |m, &s| m | (1 << s))
}

pub(crate) fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(SimError::RegisterTooLarge(n_qubits));
    }
    Ok(())
}

fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let prod = u * u.adjoint();
    let mut dev: f64 = 0.0;
    for r in 0..prod.nrows() {
        for c in 0..prod.ncols() {
            let expect = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((prod[(r, c)] - Complex64::new(expect, 0.0)).norm());
        }
    }
    dev
}
