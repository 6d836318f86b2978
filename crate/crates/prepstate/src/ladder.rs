//! Iterative excitation ladder: prepare B_M† ... B_1† |0...0> for collective
//! spin-raising operators B_α† = Σ_j c_j^α σ_j⁺ by repeatedly applying a
//! small rotation e^{iθ(B+B†)} and measuring the total excitation number.
//! Outcome +1 accepts the step, 0 retries, anything else restarts the run.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SimError};
use crate::excitation::{
    exact_ell, measure_excitations_mod, Execution, ModularMeasurementSpec, Readout,
};
use crate::ledger::ResourceLedger;
use crate::state::StateVector;

const SERIES_TOL: f64 = 1e-13;
const SERIES_MAX_TERMS: usize = 400;

/// Ladder parameters: the mode family, rotation angle, and retry policy.
#[derive(Clone, Debug)]
pub struct LadderSpec {
    pub n_sites: usize,
    pub modes: Vec<Vec<Complex64>>,
    pub theta: f64,
    pub max_retries: u32,
    pub max_restarts: u32,
}

impl LadderSpec {
    pub fn new(n_sites: usize, modes: Vec<Vec<Complex64>>, theta: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(SimError::BadParameter("no modes".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.len() != n_sites {
                return Err(SimError::BadParameter(format!(
                    "mode {i} has {} coefficients for {n_sites} sites",
                    m.len()
                )));
            }
            let norm_sq: f64 = m.iter().map(|c| c.norm_sqr()).sum();
            if (norm_sq - 1.0).abs() > 1e-6 {
                return Err(SimError::BadParameter(format!(
                    "mode {i} has squared norm {norm_sq}"
                )));
            }
        }
        Ok(Self {
            n_sites,
            modes,
            theta,
            max_retries: 200,
            max_restarts: 20,
        })
    }

    /// Largest deviation of the mode Gram matrix from the identity; the
    /// protocol's per-step error is of this order.
    pub fn gram_deviation(&self) -> f64 {
        let m = self.modes.len();
        let mut dev: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                let g: Complex64 = self.modes[a]
                    .iter()
                    .zip(&self.modes[b])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((g - Complex64::new(expect, 0.0)).norm());
            }
        }
        dev
    }
}

/// Exactly orthonormal discrete-Fourier family; mode 0 is the uniform
/// (Dicke-like) mode.
pub fn uniform_modes(n: usize, m: usize) -> Vec<Vec<Complex64>> {
    let norm = 1.0 / (n as f64).sqrt();
    (0..m)
        .map(|alpha| {
            (0..n)
                .map(|j| {
                    Complex64::from_polar(
                        norm,
                        2.0 * std::f64::consts::PI * alpha as f64 * j as f64 / n as f64,
                    )
                })
                .collect()
        })
        .collect()
}

/// Gram-Schmidt-orthonormalized random modes, then perturbed by `deviation`
/// and renormalized, so the Gram matrix deviates from the identity at that
/// scale.
pub fn perturbed_random_modes<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    deviation: f64,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    use rand_distr::StandardNormal;
    let gauss = |rng: &mut R| -> Vec<Complex64> {
        (0..n)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect()
    };
    let mut ortho: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    while ortho.len() < m {
        let mut v = gauss(rng);
        for o in &ortho {
            let ip: Complex64 = o.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(o) {
                *x -= ip * y;
            }
        }
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            ortho.push(v);
        }
    }
    ortho
        .into_iter()
        .map(|mut v| {
            let g = gauss(rng);
            let gn: f64 = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for (x, y) in v.iter_mut().zip(&g) {
                *x += deviation * y / gn;
            }
            let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / norm).collect()
        })
        .collect()
}

/// Parse a coefficient file: one mode per line, whitespace-separated
/// real/imag pairs. Blank lines and '#' comments are skipped.
pub fn parse_modes(text: &str) -> Result<Vec<Vec<Complex64>>> {
    let mut modes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let nums =
            nums.map_err(|e| SimError::CoefficientParse(format!("line {}: {e}", lineno + 1)))?;
        if nums.len() % 2 != 0 || nums.is_empty() {
            return Err(SimError::CoefficientParse(format!(
                "line {}: expected real/imag pairs, found {} numbers",
                lineno + 1,
                nums.len()
            )));
        }
        modes.push(
            nums.chunks(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect::<Vec<_>>(),
        );
    }
    if modes.is_empty() {
        return Err(SimError::CoefficientParse("no modes in input".into()));
    }
    let n = modes[0].len();
    if modes.iter().any(|m| m.len() != n) {
        return Err(SimError::CoefficientParse(
            "modes have inconsistent site counts".into(),
        ));
    }
    Ok(modes)
}

fn b_dagger_on(amps: &[Complex64], coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (j, c) in coeffs.iter().enumerate() {
        if c.norm() < 1e-16 {
            continue;
        }
        let bit = 1usize << j;
        for (idx, amp) in amps.iter().enumerate() {
            if idx & bit == 0 {
                out[idx | bit] += c * amp;
            }
        }
    }
    out
}

fn b_on(amps: &[Complex64], coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (j, c) in coeffs.iter().enumerate() {
        if c.norm() < 1e-16 {
            continue;
        }
        let bit = 1usize << j;
        for (idx, amp) in amps.iter().enumerate() {
            if idx & bit != 0 {
                out[idx & !bit] += c.conj() * amp;
            }
        }
    }
    out
}

/// B†|ψ> (unnormalized).
pub fn apply_raising_raw(state: &StateVector, coeffs: &[Complex64]) -> Vec<Complex64> {
    b_dagger_on(state.amplitudes(), coeffs)
}

/// B|ψ> (unnormalized).
pub fn apply_lowering_raw(state: &StateVector, coeffs: &[Complex64]) -> Vec<Complex64> {
    b_on(state.amplitudes(), coeffs)
}

/// e^{iθ(B+B†)}|ψ> by direct series evaluation on the state, summed until the
/// term norm drops below 1e-13.
pub fn ladder_step(state: &StateVector, coeffs: &[Complex64], theta: f64) -> Result<StateVector> {
    if coeffs.len() != state.n_qubits() {
        return Err(SimError::DimensionMismatch(coeffs.len(), state.n_qubits()));
    }
    let mut acc: Vec<Complex64> = state.amplitudes().to_vec();
    let mut term: Vec<Complex64> = state.amplitudes().to_vec();
    let mut converged = false;
    for k in 1..=SERIES_MAX_TERMS {
        let applied: Vec<Complex64> = {
            let up = b_dagger_on(&term, coeffs);
            let down = b_on(&term, coeffs);
            up.iter().zip(down).map(|(a, b)| a + b).collect()
        };
        let factor = Complex64::new(0.0, theta / k as f64);
        term = applied.into_iter().map(|z| z * factor).collect();
        let term_norm: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
        if term_norm < SERIES_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::NoConvergence(format!(
            "rotation series did not reach {SERIES_TOL} within {SERIES_MAX_TERMS} terms"
        )));
    }
    let norm: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(acc.into_iter().map(|z| z / norm).collect())
}

/// The exact normalized target B_M† ... B_1† |0...0>.
pub fn exact_ladder_target(n: usize, modes: &[Vec<Complex64>]) -> Result<StateVector> {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(1.0, 0.0);
    for mode in modes {
        amps = b_dagger_on(&amps, mode);
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(SimError::BadParameter(
            "raising operators annihilated the state".into(),
        ));
    }
    StateVector::from_amplitudes(amps.into_iter().map(|z| z / norm).collect())
}

/// ||([B_a, B_b†] - δ_ab)|ψ>|| for every mode pair.
pub fn commutator_residual(modes: &[Vec<Complex64>], state: &StateVector) -> Vec<Vec<f64>> {
    let amps = state.amplitudes();
    modes
        .iter()
        .enumerate()
        .map(|(a, ma)| {
            modes
                .iter()
                .enumerate()
                .map(|(b, mb)| {
                    let up_then_down = b_on(&b_dagger_on(amps, mb), ma);
                    let down_then_up = b_dagger_on(&b_on(amps, ma), mb);
                    let delta = if a == b { 1.0 } else { 0.0 };
                    up_then_down
                        .iter()
                        .zip(&down_then_up)
                        .zip(amps)
                        .map(|((u, d), s)| (u - d - Complex64::new(delta, 0.0) * s).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct AttemptRecord {
    /// Change of the measured excitation number relative to the step's
    /// starting count; +1 accepts.
    pub outcome_k: i64,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct StepTrace {
    pub mode_index: usize,
    pub attempts: Vec<AttemptRecord>,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct LadderTrace {
    pub steps: Vec<StepTrace>,
    pub restarts: u32,
    pub final_state: StateVector,
    pub infidelity: f64,
    pub succeeded: bool,
    /// Product of all recorded outcome probabilities (the path weight of this
    /// run through the measurement tree).
    pub path_weight: f64,
    pub ledger: ResourceLedger,
}

/// Run the full ladder with the exact excitation-number measurement
/// (ell = ceil(log2(N+1))). Accepted steps have outcome +1; 0 retries the
/// rotation on the post-measurement state; any other change restarts from
/// the vacuum.
pub fn run_ladder<R: Rng + ?Sized>(spec: &LadderSpec, rng: &mut R) -> Result<LadderTrace> {
    let n = spec.n_sites;
    let ell = exact_ell(n);
    let mspec = ModularMeasurementSpec::new((0..n).collect(), ell, 0)?;
    let target = exact_ladder_target(n, &spec.modes)?;

    let mut ledger = ResourceLedger::new();
    ledger.repetitions = 1;
    let mut steps: Vec<StepTrace> = Vec::new();
    let mut restarts = 0u32;
    let mut path_weight = 1.0;
    let mut state = StateVector::zero_state(n)?;
    let mut step_idx = 0usize;
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let mut succeeded = false;

    'protocol: loop {
        if step_idx == spec.modes.len() {
            succeeded = true;
            break;
        }
        if attempts.len() as u32 >= spec.max_retries {
            steps.push(StepTrace {
                mode_index: step_idx,
                attempts: std::mem::take(&mut attempts),
                accepted: false,
            });
            break 'protocol;
        }
        let rotated = ladder_step(&state, &spec.modes[step_idx], spec.theta)?;
        ledger.unitary_layer("ladder rotation", Vec::new());
        let out = measure_excitations_mod(&rotated, &mspec, Execution::Fast, Readout::Sample, rng)?;
        ledger.absorb(out.ledger);
        let k = out.outcome as i64 - step_idx as i64;
        attempts.push(AttemptRecord {
            outcome_k: k,
            probability: out.probability,
        });
        path_weight *= out.probability;
        match k {
            1 => {
                state = out.state;
                steps.push(StepTrace {
                    mode_index: step_idx,
                    attempts: std::mem::take(&mut attempts),
                    accepted: true,
                });
                step_idx += 1;
            }
            0 => {
                state = out.state;
            }
            _ => {
                steps.push(StepTrace {
                    mode_index: step_idx,
                    attempts: std::mem::take(&mut attempts),
                    accepted: false,
                });
                restarts += 1;
                if restarts > spec.max_restarts {
                    break 'protocol;
                }
                state = StateVector::zero_state(n)?;
                step_idx = 0;
            }
        }
    }

    let infidelity = state.infidelity(&target)?;
    Ok(LadderTrace {
        steps,
        restarts,
        final_state: state,
        infidelity,
        succeeded,
        path_weight,
        ledger,
    })
}
