//! Acceptance suite: one test per protocol guarantee, each printing a
//! PASS line with the measured margins. Run with
//! `cargo test -p prepstate --test acceptance`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use prepstate::amplitude::{
    aa_approximate, aa_exact, improved_dicke, iteration_bound, rotated_dicke_overlaps,
    sector_coefficients, sector_tail_bound, AaInputs, AaSchedule, ImprovedDickeParams,
    PerturbedPhaseOracle, ProjectorPhaseOracle,
};
use prepstate::bounds;
use prepstate::dicke::{
    ell_for_dicke, prepare_dicke, prepare_w_parity, DickeParams, PrepareOptions,
};
use prepstate::excitation::{exact_ell, modular_branches, Execution, ModularMeasurementSpec};
use prepstate::fanout::{apply_v_reference, enumerate_v_protocol, ControlledProductSpec};
use prepstate::ladder::{commutator_residual, exact_ladder_target, ladder_step, uniform_modes};
use prepstate::xx_chain::{dense_xx_hamiltonian, prepare_xx_eigenstate, xx_modes};
use prepstate::{RegisterLayout, StateVector};

/// Criterion 1: the controlled-product protocol is deterministic — every
/// measurement branch reproduces the direct-matrix reference at depth
/// exactly 6 with one ancilla per site.
#[test]
fn criterion_01_v_protocol_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut min_fidelity: f64 = 1.0;
    let mut branches_checked = 0usize;
    for n in [2usize, 4, 6] {
        let layout = RegisterLayout::contiguous(n, 1, 0);
        for _ in 0..50 {
            // Arbitrary joint state on system + control; helpers in |0>.
            let input = StateVector::random(n + 1, &mut rng)
                .tensor_zeros(n - 1)
                .unwrap();
            let spec = ControlledProductSpec::random(n, &mut rng);
            let reference = apply_v_reference(&input, &layout, &spec).unwrap();
            let branches = enumerate_v_protocol(&input, &layout, &spec).unwrap();
            let mut total_weight = 0.0;
            for (branch, weight) in &branches {
                let fid = branch.state.fidelity(&reference).unwrap();
                min_fidelity = min_fidelity.min(fid);
                assert!(
                    fid >= 1.0 - 1e-10,
                    "branch fidelity {fid} at n={n}, weight {weight}"
                );
                assert_eq!(branch.ledger.depth(), 6, "depth must be exactly 6");
                assert_eq!(branch.ledger.ancillas_per_site, 1);
                total_weight += weight;
                branches_checked += 1;
            }
            assert!((total_weight - 1.0).abs() < 1e-10);
        }
    }
    println!(
        "criterion 1 PASS: V-protocol deterministic over {branches_checked} branches, \
         min fidelity {min_fidelity:.3e}, depth 6"
    );
}

/// Criterion 2: the modular excitation measurement circuit reproduces the
/// brute-force sector projector — outcome distribution within 1e-10 total
/// variation and per-branch post-states at fidelity 1 - 1e-10.
#[test]
fn criterion_02_measurement_circuit_matches_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut max_tv: f64 = 0.0;
    let mut min_fid: f64 = 1.0;
    for n in 2..=6usize {
        let sites: Vec<usize> = (0..n).collect();
        for ell in 1..=exact_ell(n) {
            for _ in 0..20 {
                let st = StateVector::random(n, &mut rng);
                let spec = ModularMeasurementSpec::new(sites.clone(), ell, 0).unwrap();
                let branches = modular_branches(&st, &spec, Execution::Protocol, &mut rng).unwrap();
                let modulus = 1usize << ell;
                let mut tv = 0.0;
                for j in 0..modulus {
                    let circuit_p = branches
                        .iter()
                        .find(|b| b.outcome == j)
                        .map(|b| b.probability)
                        .unwrap_or(0.0);
                    match st.project_excitations_mod(&sites, j, modulus) {
                        Ok((w, reference)) => {
                            tv += 0.5 * (circuit_p - w).abs();
                            if let Some(b) = branches.iter().find(|b| b.outcome == j) {
                                let fid = b.state.fidelity(&reference).unwrap();
                                min_fid = min_fid.min(fid);
                                assert!(fid >= 1.0 - 1e-10, "branch fidelity {fid}");
                            }
                        }
                        Err(_) => tv += 0.5 * circuit_p,
                    }
                }
                max_tv = max_tv.max(tv);
                assert!(tv <= 1e-10, "total variation {tv} at n={n}, ell={ell}");
            }
        }
    }
    println!(
        "criterion 2 PASS: circuit-vs-projector max TV {max_tv:.3e}, min branch fidelity \
         {min_fid:.3e}"
    );
}

/// Criterion 3: repeat-until-success Dicke preparation meets the target
/// infidelity, the exponential infidelity bound, and the success-probability
/// floor for every tested (N, M, epsilon). Zero violations.
#[test]
fn criterion_03_dicke_preparation_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_margin = f64::INFINITY;
    for (n, m) in [(8usize, 1usize), (12, 2), (16, 3)] {
        for eps in [1e-1, 1e-2, 1e-3] {
            let params = DickeParams::new(n, m, eps).unwrap();
            let opts = PrepareOptions {
                max_repetitions: 500,
                ..Default::default()
            };
            let report = prepare_dicke(&params, &opts, &mut rng).unwrap();
            assert!(report.succeeded, "run failed at n={n}, m={m}, eps={eps}");
            assert!(
                report.infidelity <= eps,
                "infidelity {} above {eps} at n={n}, m={m}",
                report.infidelity
            );
            let exp_bound = (8.0 * PI * m as f64).sqrt()
                * (-(2f64.powi(ell_for_dicke(m, eps).unwrap().min(exact_ell(n)) as i32 - 1))).exp();
            assert!(
                report.infidelity <= exp_bound,
                "infidelity {} above exponential bound {exp_bound}",
                report.infidelity
            );
            let p = report.success_probability.unwrap();
            let floor = 1.0 / (8.0 * PI * m as f64).sqrt();
            assert!(p >= floor, "success probability {p} below {floor}");
            assert!(report.all_bounds_hold());
            worst_margin = worst_margin.min(p / floor);
        }
    }
    println!(
        "criterion 3 PASS: all Dicke bounds hold; tightest success-probability margin \
         {worst_margin:.3}"
    );
}

/// Criterion 4: parity-based W preparation meets infidelity <= delta^2/4 and
/// success probability >= delta/2; the two-site accept branch is exactly |W>.
#[test]
fn criterion_04_w_parity_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for n in [4usize, 8, 12] {
        for delta in [0.05, 0.1, 0.2] {
            let opts = PrepareOptions {
                max_repetitions: 5000,
                ..Default::default()
            };
            let report = prepare_w_parity(n, delta, &opts, &mut rng).unwrap();
            assert!(report.succeeded);
            assert!(
                report.infidelity <= delta * delta / 4.0,
                "infidelity {} above {} at n={n}, delta={delta}",
                report.infidelity,
                delta * delta / 4.0
            );
            assert!(report.success_probability.unwrap() >= delta / 2.0);
            assert!(report.all_bounds_hold());
        }
    }
    let opts = PrepareOptions {
        postselect: true,
        ..Default::default()
    };
    let two = prepare_w_parity(2, 0.4, &opts, &mut rng).unwrap();
    assert!(
        two.infidelity <= 1e-12,
        "two-site branch not exact: {}",
        two.infidelity
    );
    println!("criterion 4 PASS: W-parity bounds hold; two-site branch exact to 1e-12");
}

/// Criterion 5: exact amplitude amplification reaches the target at fidelity
/// 1 - 1e-9 over a 100-point angle grid with the exact iteration count
/// floor(m*) (+1 iff fractional).
#[test]
fn criterion_05_exact_amplitude_amplification() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let psi1 = StateVector::random(3, &mut rng);
    let raw = StateVector::random(3, &mut rng);
    let overlap = psi1.inner(&raw).unwrap();
    let amps: Vec<Complex64> = raw
        .amplitudes()
        .iter()
        .zip(psi1.amplitudes())
        .map(|(r, p)| r - overlap * p)
        .collect();
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi2 = StateVector::from_amplitudes(amps.into_iter().map(|z| z / norm).collect()).unwrap();

    let mut min_fid: f64 = 1.0;
    for i in 1..=100usize {
        let alpha = PI / 2.0 * i as f64 / 100.0;
        let inputs = AaInputs {
            alpha,
            psi1: psi1.clone(),
            psi2: psi2.clone(),
        };
        let s1 = ProjectorPhaseOracle {
            axis: inputs.psi().unwrap(),
        };
        let s2 = ProjectorPhaseOracle { axis: psi1.clone() };
        let out = aa_exact(&inputs, &s1, &s2).unwrap();
        let fid = out.state.fidelity(&psi1).unwrap();
        min_fid = min_fid.min(fid);
        assert!(fid >= 1.0 - 1e-9, "alpha {alpha}: fidelity {fid}");
        let schedule = AaSchedule::new(alpha).unwrap();
        let expect = schedule.floor_m + usize::from(schedule.final_phases.is_some());
        assert_eq!(out.iterations, expect, "iteration count at alpha {alpha}");
    }
    println!("criterion 5 PASS: 100-angle grid, min fidelity {min_fid:.12}");
}

/// Criterion 6: approximate amplitude amplification never violates the
/// 4(floor(m*)+1)·delta infidelity bound over randomized perturbed oracles.
#[test]
fn criterion_06_approximate_amplitude_amplification() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_ratio: f64 = 0.0;
    for trial in 0..100 {
        let delta = if trial % 2 == 0 { 1e-2 } else { 1e-3 };
        let n = 3;
        let psi1 = StateVector::random(n, &mut rng);
        let raw = StateVector::random(n, &mut rng);
        let overlap = psi1.inner(&raw).unwrap();
        let amps: Vec<Complex64> = raw
            .amplitudes()
            .iter()
            .zip(psi1.amplitudes())
            .map(|(r, p)| r - overlap * p)
            .collect();
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi2 =
            StateVector::from_amplitudes(amps.into_iter().map(|z| z / norm).collect()).unwrap();
        let alpha = 0.12 + 0.6 * rng.random::<f64>();
        let inputs = AaInputs { alpha, psi1, psi2 };

        let psi = inputs.psi().unwrap();
        let psi_tilde = inputs.psi_tilde().unwrap();
        let orthogonalize = |a: &StateVector, b: &StateVector, rng: &mut ChaCha8Rng| loop {
            let raw = StateVector::random(n, rng);
            let ca = a.inner(&raw).unwrap();
            let cb = b.inner(&raw).unwrap();
            let v: Vec<Complex64> = raw
                .amplitudes()
                .iter()
                .zip(a.amplitudes().iter().zip(b.amplitudes()))
                .map(|(r, (x, y))| r - ca * x - cb * y)
                .collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.1 {
                return StateVector::from_amplitudes(v.into_iter().map(|z| z / norm).collect())
                    .unwrap();
            }
        };
        let size = delta / 2.0 * (0.2 + 0.75 * rng.random::<f64>());
        let eta = 2.0 * (size / 2.0).asin();
        let t1 = PerturbedPhaseOracle {
            axis: psi.clone(),
            plane_a: psi_tilde.clone(),
            plane_b: orthogonalize(&psi, &psi_tilde, &mut rng),
            eta,
        };
        let t2 = PerturbedPhaseOracle {
            axis: inputs.psi1.clone(),
            plane_a: inputs.psi2.clone(),
            plane_b: orthogonalize(&inputs.psi1, &inputs.psi2, &mut rng),
            eta,
        };
        let out = aa_approximate(&inputs, &t1, &t2, delta).unwrap();
        assert!(
            out.achieved_infidelity <= out.infidelity_bound,
            "trial {trial}: infidelity {} above bound {}",
            out.achieved_infidelity,
            out.infidelity_bound
        );
        worst_ratio = worst_ratio.max(out.achieved_infidelity / out.infidelity_bound);
    }
    println!(
        "criterion 6 PASS: 100 perturbed instances, worst infidelity/bound ratio \
         {worst_ratio:.3e}"
    );
}

/// Criterion 7: the deterministic (single-repetition) Dicke scheme reaches
/// infidelity <= 4*delta within the iteration budget.
#[test]
fn criterion_07_improved_dicke() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for (n, m) in [(4usize, 1usize), (8, 2), (12, 3)] {
        for delta in [0.1, 0.03, 0.01] {
            let params = ImprovedDickeParams::new(n, m, delta).unwrap();
            let report = improved_dicke(&params, Execution::Fast, &mut rng).unwrap();
            assert_eq!(report.repetitions_used, 1, "single shot required");
            assert!(
                report.infidelity <= 4.0 * delta,
                "infidelity {} above {} at n={n}, m={m}",
                report.infidelity,
                4.0 * delta
            );
            let iterations = report.trial_outcomes[0] as f64;
            assert!(
                iterations <= iteration_bound(m),
                "{iterations} iterations above bound {}",
                iteration_bound(m)
            );
            assert!(report.all_bounds_hold());
        }
    }
    println!("criterion 7 PASS: deterministic Dicke preparation within 4*delta, single shot");
}

/// Criterion 8: sector coefficients of the rotated Dicke state are
/// normalized, match the statevector overlaps, and obey the exponential tail
/// bound for every s >= 3M.
#[test]
fn criterion_08_sector_coefficients() {
    for m in [1usize, 2, 3] {
        let n = 4 * m;
        let p = m as f64 / n as f64;
        let theta = p.sqrt().asin();
        let cs = sector_coefficients(n, m, theta).unwrap();
        let sum = cs.weight_sum();
        assert!((sum - 1.0).abs() <= 1e-10, "sum {sum} at m={m}");
        let overlaps = rotated_dicke_overlaps(n, m, theta).unwrap();
        for (s, (a, b)) in cs.coefficients.iter().zip(&overlaps).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10,
                "c_{s} mismatch at m={m}: {a} vs {b}"
            );
        }
        for s in 3 * m..=n {
            let tail = cs.tail(s);
            let bound = sector_tail_bound(m, s);
            assert!(
                tail <= bound,
                "tail {tail} above bound {bound} at m={m}, s={s}"
            );
        }
    }
    println!("criterion 8 PASS: sector coefficients normalized, matched, tail-bounded");
}

/// Criterion 9: XX-chain eigenstate preparation — eigen-residual <= 1e-8,
/// fidelity with the exact (possibly degenerate) eigenspace >= 1 - 1e-9, the
/// palindromic chain reconstructs the excitation unitary, and the ledger
/// depth is exactly M·(26N - 25).
#[test]
fn criterion_09_xx_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_residual: f64 = 0.0;
    let mut cases: Vec<(usize, Vec<usize>)> = Vec::new();
    for n in [2usize, 4, 6] {
        for alpha in 0..n {
            cases.push((n, vec![alpha]));
        }
    }
    for n in [4usize, 6] {
        for _ in 0..5 {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            while b == a {
                b = rng.random_range(0..n);
            }
            cases.push((n, vec![a, b]));
        }
    }
    for (n, indices) in &cases {
        let out = prepare_xx_eigenstate(*n, indices, Execution::Protocol, &mut rng).unwrap();
        worst_residual = worst_residual.max(out.residual);
        assert!(
            out.residual <= 1e-8,
            "residual {} at n={n}, modes {indices:?}",
            out.residual
        );
        // Degenerate-eigenspace fidelity from dense diagonalization.
        let h = dense_xx_hamiltonian(*n);
        let eig = h.symmetric_eigen();
        let amps = out.report.final_state.amplitudes();
        let mut fid = 0.0;
        for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
            if (lambda - out.energy).abs() < 1e-8 {
                let overlap: Complex64 = eig
                    .eigenvectors
                    .column(col)
                    .iter()
                    .zip(amps)
                    .map(|(v, a)| Complex64::new(*v, 0.0) * a)
                    .sum();
                fid += overlap.norm_sqr();
            }
        }
        assert!(
            fid >= 1.0 - 1e-9,
            "eigenspace fidelity {fid} at n={n}, modes {indices:?}"
        );
        // Depth shape: proportional to M and affine in N.
        let expect_depth = (indices.len() as u64) * (26 * *n as u64 - 25);
        assert_eq!(out.report.ledger.depth(), expect_depth);
    }
    // Palindromic reconstruction against the closed-form rotation
    // cos θ + i sin θ (A + A†) is covered per excitation by comparing the
    // prepared state to the exact operator product; spot-check explicitly.
    for n in [4usize, 6] {
        let set = xx_modes(n).unwrap();
        let out = prepare_xx_eigenstate(n, &[0], Execution::Fast, &mut rng).unwrap();
        let oracle = prepstate::xx_chain::exact_eigenstate(n, &set.modes[0..1]).unwrap();
        assert!(out.report.final_state.fidelity(&oracle).unwrap() >= 1.0 - 1e-9);
    }
    println!(
        "criterion 9 PASS: {} cases, worst eigen-residual {worst_residual:.3e}, depth = \
         M(26N-25)",
        cases.len()
    );
}

/// Criterion 10: excitation-ladder scalings — the per-attempt acceptance
/// probability scales as θ^2 (slope fitted on 10^4 sampled attempts per θ)
/// and the failure probability as θ^4 (slope fitted on the exact per-attempt
/// weights; expected failure counts at the smallest θ are below one event per
/// 10^4 attempts, so sampled frequencies carry no information there).
/// The commutator residual decreases with N.
#[test]
fn criterion_10_ladder_scalings() {
    let n = 12;
    let m = 2;
    let modes = uniform_modes(n, m);
    let psi1 = exact_ladder_target(n, &modes[0..1]).unwrap();
    let sites: Vec<usize> = (0..n).collect();
    let thetas = [0.05, 0.1, 0.2];
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut ln_accept_emp = Vec::new();
    let mut ln_accept_analytic = Vec::new();
    let mut ln_fail_analytic = Vec::new();
    for &theta in &thetas {
        let rotated = ladder_step(&psi1, &modes[1], theta).unwrap();
        let weights = rotated.excitation_weights(&sites);
        let p_accept = weights[2];
        let p_fail: f64 = weights[3..].iter().sum();
        // 10^4 sampled attempts, each resetting to the exact one-excitation
        // state.
        let attempts = 10_000;
        let mut accept_count = 0usize;
        let mut fail_count = 0usize;
        for _ in 0..attempts {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut outcome = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    outcome = k;
                    break;
                }
            }
            match outcome {
                2 => accept_count += 1,
                k if k >= 3 => fail_count += 1,
                _ => {}
            }
        }
        let emp_accept = accept_count as f64 / attempts as f64;
        println!(
            "  theta {theta}: accept emp {emp_accept:.4} / analytic {p_accept:.4}, \
             fail count {fail_count} / analytic {p_fail:.3e}"
        );
        ln_accept_emp.push((theta.ln(), emp_accept.ln()));
        ln_accept_analytic.push((theta.ln(), p_accept.ln()));
        ln_fail_analytic.push((theta.ln(), p_fail.ln()));
    }
    let slope = |pts: &[(f64, f64)]| -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let accept_slope = slope(&ln_accept_emp);
    let accept_slope_analytic = slope(&ln_accept_analytic);
    let fail_slope = slope(&ln_fail_analytic);
    assert!(
        (accept_slope - 2.0).abs() <= 0.3,
        "accept slope {accept_slope} outside 2 +- 0.3"
    );
    assert!(
        (accept_slope_analytic - 2.0).abs() <= 0.3,
        "analytic accept slope {accept_slope_analytic}"
    );
    assert!(
        (fail_slope - 4.0).abs() <= 0.5,
        "fail slope {fail_slope} outside 4 +- 0.5"
    );

    // Commutator residual strictly decreases over the N sweep.
    let mut last = f64::INFINITY;
    for n in [8usize, 12, 16, 20] {
        let modes = uniform_modes(n, 2);
        let st = exact_ladder_target(n, &modes).unwrap();
        let res = commutator_residual(&modes, &st);
        let max = res.iter().flatten().fold(0.0f64, |a, &x| a.max(x));
        assert!(max < last, "residual {max} did not decrease at n={n}");
        last = max;
    }
    println!(
        "criterion 10 PASS: accept slope {accept_slope:.2} (empirical), fail slope \
         {fail_slope:.2} (analytic), residual decreasing in N"
    );
}

/// Criterion 11: Stirling sandwich and Chernoff tail bound over all
/// 0 < M < N <= 30 and ell <= 6.
#[test]
fn criterion_11_inequality_suite() {
    let mut checked = 0usize;
    for n in 2..=30usize {
        for m in 1..n {
            let (lo, v, hi) = bounds::stirling_sandwich(n, m);
            assert!(lo < v && v < hi, "stirling fails at n={n}, m={m}");
            for ell in 1..=6usize {
                let (tail, bound) = bounds::chernoff_excess_tail(n, m, ell);
                assert!(
                    tail <= bound + 1e-15,
                    "chernoff fails at n={n}, m={m}, ell={ell}"
                );
                checked += 1;
            }
        }
    }
    println!("criterion 11 PASS: {checked} inequality instances hold");
}
