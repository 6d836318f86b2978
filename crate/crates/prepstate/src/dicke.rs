//! Repeat-until-success preparation of Dicke states |W(M)> by measuring the
//! excitation number of a product state modulo 2^ell, and the simpler
//! parity-based W-state protocol.

use rand::Rng;

use crate::bounds;
use crate::error::{Result, SimError};
use crate::excitation::{
    exact_ell, measure_excitations_mod, Execution, ModularMeasurementSpec, Readout,
};
use crate::ledger::ResourceLedger;
use crate::report::{BoundCheck, PreparationReport};
use crate::state::StateVector;

/// Parameters of the Dicke preparation: N sites, M excitations (M <= N/2),
/// target infidelity epsilon.
#[derive(Clone, Copy, Debug)]
pub struct DickeParams {
    pub n_sites: usize,
    pub excitations: usize,
    pub epsilon: f64,
}

impl DickeParams {
    pub fn new(n_sites: usize, excitations: usize, epsilon: f64) -> Result<Self> {
        if excitations == 0 || 2 * excitations > n_sites {
            return Err(SimError::BadParameter(format!(
                "excitations {excitations} outside 1..={} for {n_sites} sites",
                n_sites / 2
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SimError::BadParameter(format!(
                "epsilon {epsilon} outside (0, 1)"
            )));
        }
        Ok(Self {
            n_sites,
            excitations,
            epsilon,
        })
    }

    pub fn flip_probability(&self) -> f64 {
        self.excitations as f64 / self.n_sites as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PrepareOptions {
    pub max_repetitions: u64,
    pub exec: Execution,
    /// Postselect the accepting outcome instead of sampling repetitions.
    pub postselect: bool,
    pub ell_override: Option<usize>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            max_repetitions: 200,
            exec: Execution::Fast,
            postselect: false,
            ell_override: None,
        }
    }
}

/// |W(M)>: the uniform superposition of all weight-M basis states.
pub fn make_dicke_state(n: usize, m: usize) -> Result<StateVector> {
    crate::state::check_register(n)?;
    if m > n {
        return Err(SimError::BadParameter(format!(
            "{m} excitations on {n} sites"
        )));
    }
    let count = bounds::ln_binomial(n, m).exp().round();
    let amp = num_complex::Complex64::new(1.0 / count.sqrt(), 0.0);
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 1 << n];
    for (i, a) in amps.iter_mut().enumerate() {
        if i.count_ones() as usize == m {
            *a = amp;
        }
    }
    StateVector::from_amplitudes(amps)
}

/// (sqrt(1-p)|0> + sqrt(p)|1>)^{⊗n}; its weight-e sector amplitudes are the
/// square-root binomial weights.
pub fn make_product_state(n: usize, p: f64) -> Result<StateVector> {
    crate::state::check_register(n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::BadParameter(format!("p = {p} outside [0, 1]")));
    }
    let a0 = (1.0 - p).sqrt();
    let a1 = p.sqrt();
    let amps = (0..1usize << n)
        .map(|i| {
            let w = i.count_ones() as i32;
            num_complex::Complex64::new(a1.powi(w) * a0.powi(n as i32 - w), 0.0)
        })
        .collect();
    StateVector::from_amplitudes(amps)
}

/// Ancilla count for target infidelity epsilon:
/// ceil(max{log2(4M), 1 + log2 ln(sqrt(8*pi*M)/epsilon)}).
pub fn ell_for_dicke(m: usize, epsilon: f64) -> Result<usize> {
    if m == 0 {
        return Err(SimError::BadParameter(
            "need at least one excitation".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SimError::BadParameter(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    let first = (4.0 * m as f64).log2();
    let ratio = (8.0 * std::f64::consts::PI * m as f64).sqrt() / epsilon;
    let second = 1.0 + ratio.ln().log2();
    Ok(first.max(second).ceil() as usize)
}

/// Prepare |W(M)> by repeated modular measurement of the product state,
/// accepting outcome M mod 2^ell. Reports the measured infidelity, the
/// analytic success probability, and the guaranteed bounds.
pub fn prepare_dicke<R: Rng + ?Sized>(
    params: &DickeParams,
    opts: &PrepareOptions,
    rng: &mut R,
) -> Result<PreparationReport> {
    let n = params.n_sites;
    let m = params.excitations;
    let p = params.flip_probability();
    let mut notes = Vec::new();

    let cap = exact_ell(n);
    let ell_wanted = match opts.ell_override {
        Some(e) => e,
        None => ell_for_dicke(m, params.epsilon)?,
    };
    let ell = if ell_wanted > cap {
        notes.push(format!(
            "ell {ell_wanted} capped to {cap}: exact regime, the measurement resolves the \
             excitation number"
        ));
        cap
    } else {
        ell_wanted
    };
    let modulus = 1usize << ell;
    let accept = m % modulus;

    let target = make_dicke_state(n, m)?;
    let success_probability = bounds::dicke_sector_probability(n, m, ell);
    let spec = ModularMeasurementSpec::new((0..n).collect(), ell, 0)?;

    let mut trial_outcomes = Vec::new();
    let mut outcome_state = None;
    let mut ledger = ResourceLedger::new();
    let mut repetitions = 0u64;
    while repetitions < opts.max_repetitions {
        repetitions += 1;
        let product = make_product_state(n, p)?;
        let mut trial_ledger = ResourceLedger::new();
        trial_ledger.unitary_layer("product-state rotation", (0..n).map(|j| vec![j]).collect());
        let readout = if opts.postselect {
            Readout::Postselect(accept)
        } else {
            Readout::Sample
        };
        let out = measure_excitations_mod(&product, &spec, opts.exec, readout, rng)?;
        trial_outcomes.push(out.outcome);
        trial_ledger.absorb(out.ledger);
        ledger = trial_ledger;
        if out.outcome == accept {
            outcome_state = Some(out.state);
            break;
        }
    }
    ledger.repetitions = repetitions;

    let (succeeded, final_state) = match outcome_state {
        Some(st) => (true, st),
        None => {
            notes.push(format!(
                "no accepting outcome within {} repetitions",
                opts.max_repetitions
            ));
            (false, make_product_state(n, p)?)
        }
    };
    let infidelity = final_state.infidelity(&target)?;

    let mut bound_checks = vec![
        BoundCheck::at_most("infidelity <= epsilon", infidelity, params.epsilon),
        BoundCheck::at_most(
            "infidelity <= sqrt(8*pi*M) * exp(-2^(ell-1))",
            infidelity,
            (8.0 * std::f64::consts::PI * m as f64).sqrt() * (-((1u64 << (ell - 1)) as f64)).exp(),
        ),
        BoundCheck::at_least(
            "success probability >= 1/sqrt(8*pi*M)",
            success_probability,
            1.0 / (8.0 * std::f64::consts::PI * m as f64).sqrt(),
        ),
    ];
    if !succeeded {
        // A failed run reports its trial record; the infidelity bounds are
        // marked unsatisfied by construction.
        bound_checks[0].satisfied = false;
    }

    Ok(PreparationReport {
        final_state,
        infidelity,
        success_probability: Some(success_probability),
        repetitions_used: repetitions,
        succeeded,
        ledger,
        bound_checks,
        trial_outcomes,
        notes,
    })
}

/// Analytic odd-parity weight of the biased product state: (1-(1-2q)^n)/2
/// with q = delta/n.
pub fn w_parity_success_probability(n: usize, delta: f64) -> f64 {
    let q = delta / n as f64;
    0.5 * (1.0 - (1.0 - 2.0 * q).powi(n as i32))
}

/// W-state preparation by parity measurement: rotate every site by
/// sqrt(delta/n), measure the excitation parity (ell = 1), accept odd.
pub fn prepare_w_parity<R: Rng + ?Sized>(
    n: usize,
    delta: f64,
    opts: &PrepareOptions,
    rng: &mut R,
) -> Result<PreparationReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SimError::BadParameter(format!(
            "delta {delta} outside (0, 1]"
        )));
    }
    let q = delta / n as f64;
    let target = make_dicke_state(n, 1)?;
    let success_probability = w_parity_success_probability(n, delta);
    let spec = ModularMeasurementSpec::new((0..n).collect(), 1, 0)?;

    let mut trial_outcomes = Vec::new();
    let mut outcome_state = None;
    let mut ledger = ResourceLedger::new();
    let mut repetitions = 0u64;
    while repetitions < opts.max_repetitions {
        repetitions += 1;
        let product = make_product_state(n, q)?;
        let mut trial_ledger = ResourceLedger::new();
        trial_ledger.unitary_layer("product-state rotation", (0..n).map(|j| vec![j]).collect());
        let readout = if opts.postselect {
            Readout::Postselect(1)
        } else {
            Readout::Sample
        };
        let out = measure_excitations_mod(&product, &spec, opts.exec, readout, rng)?;
        trial_outcomes.push(out.outcome);
        trial_ledger.absorb(out.ledger);
        ledger = trial_ledger;
        if out.outcome == 1 {
            outcome_state = Some(out.state);
            break;
        }
    }
    ledger.repetitions = repetitions;

    let mut notes = Vec::new();
    let (succeeded, final_state) = match outcome_state {
        Some(st) => (true, st),
        None => {
            notes.push(format!(
                "no odd-parity outcome within {} repetitions",
                opts.max_repetitions
            ));
            (false, make_product_state(n, q)?)
        }
    };
    let infidelity = final_state.infidelity(&target)?;

    let bound_checks = vec![
        BoundCheck::at_most("infidelity <= delta^2/4", infidelity, delta * delta / 4.0),
        BoundCheck::at_least(
            "success probability >= delta/2",
            success_probability,
            delta / 2.0,
        ),
    ];

    Ok(PreparationReport {
        final_state,
        infidelity,
        success_probability: Some(success_probability),
        repetitions_used: repetitions,
        succeeded,
        ledger,
        bound_checks,
        trial_outcomes,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dicke_state_small_cases() {
        let w21 = make_dicke_state(2, 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w21.amplitudes()[1].re - r).abs() < 1e-15);
        assert!((w21.amplitudes()[2].re - r).abs() < 1e-15);

        let vac = make_dicke_state(3, 0).unwrap();
        assert!((vac.amplitudes()[0].re - 1.0).abs() < 1e-15);

        let w42 = make_dicke_state(4, 2).unwrap();
        let nonzero: Vec<f64> = w42
            .amplitudes()
            .iter()
            .filter(|a| a.norm() > 1e-12)
            .map(|a| a.re)
            .collect();
        assert_eq!(nonzero.len(), 6);
        for a in nonzero {
            assert!((a - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        }

        assert!(make_dicke_state(3, 4).is_err());
    }

    #[test]
    fn product_state_edge_and_overlaps() {
        let vac = make_product_state(4, 0.0).unwrap();
        assert!((vac.amplitudes()[0].re - 1.0).abs() < 1e-15);

        let half = make_product_state(2, 0.5).unwrap();
        for a in half.amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-12);
        }
        let w = make_dicke_state(2, 1).unwrap();
        let overlap = half.inner(&w).unwrap().norm();
        assert!((overlap - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    // Oracle: the binomial identity evaluated independently.
    #[test]
    fn sector_overlaps_are_binomial_weights() {
        let n = 6;
        let p = 1.0 / 3.0;
        let st = make_product_state(n, p).unwrap();
        for e in 0..=n {
            let w = make_dicke_state(n, e).unwrap();
            let got = st.inner(&w).unwrap().norm_sqr();
            let expect = bounds::binomial_pmf(n, e, p);
            assert!(
                (got - expect).abs() < 1e-12,
                "sector {e}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn product_state_reconstructs_from_dicke_components() {
        for n in [2usize, 5, 9, 12] {
            for &p in &[0.1, 0.37, 0.5, 0.9] {
                let st = make_product_state(n, p).unwrap();
                let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 1 << n];
                for e in 0..=n {
                    let w = make_dicke_state(n, e).unwrap();
                    let coeff = bounds::binomial_pmf(n, e, p).sqrt();
                    for (a, b) in amps.iter_mut().zip(w.amplitudes()) {
                        *a += b * coeff;
                    }
                }
                let rebuilt = StateVector::from_amplitudes(amps).unwrap();
                assert!(rebuilt.infidelity(&st).unwrap() < 1e-12);
            }
        }
    }

    // Oracle values: evaluated from the closed form by hand.
    #[test]
    fn ell_formula_examples() {
        assert_eq!(ell_for_dicke(1, 1e-3).unwrap(), 5);
        assert_eq!(ell_for_dicke(4, 0.5).unwrap(), 4);
        // Monotone nonincreasing in epsilon.
        let mut last = usize::MAX;
        for &eps in &[1e-6, 1e-4, 1e-2, 0.3, 0.9] {
            let e = ell_for_dicke(2, eps).unwrap();
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn exact_regime_postselect_is_exact() {
        let params = DickeParams::new(8, 2, 1e-3).unwrap();
        let opts = PrepareOptions {
            postselect: true,
            ell_override: Some(exact_ell(8)),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = prepare_dicke(&params, &opts, &mut rng).unwrap();
        assert!(report.succeeded);
        assert!(report.infidelity < 1e-12);
        assert_eq!(report.repetitions_used, 1);
    }

    #[test]
    fn dicke_bounds_hold_for_sampled_runs() {
        let params = DickeParams::new(12, 2, 1e-2).unwrap();
        let opts = PrepareOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let report = prepare_dicke(&params, &opts, &mut rng).unwrap();
        assert!(report.succeeded);
        assert!(report.infidelity <= 1e-2);
        assert!(report.all_bounds_hold(), "{:?}", report.bound_checks);
        let p = report.success_probability.unwrap();
        assert!(p >= 1.0 / (16.0 * std::f64::consts::PI).sqrt());
    }

    #[test]
    fn w_success_probability_matches_direct_sum() {
        for n in [3usize, 7, 10] {
            for &delta in &[0.05, 0.2, 0.8] {
                let q = delta / n as f64;
                let direct: f64 = (0..=n)
                    .filter(|e| e % 2 == 1)
                    .map(|e| bounds::binomial_pmf(n, e, q))
                    .sum();
                let closed = w_parity_success_probability(n, delta);
                assert!((direct - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn w_parity_two_sites_is_exact() {
        let opts = PrepareOptions {
            postselect: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = prepare_w_parity(2, 0.3, &opts, &mut rng).unwrap();
        assert!(report.infidelity < 1e-12);
    }

    #[test]
    fn w_parity_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let report = prepare_w_parity(10, 0.2, &PrepareOptions::default(), &mut rng).unwrap();
        assert!(report.succeeded);
        assert!(report.infidelity <= 0.01);
        assert!(report.success_probability.unwrap() >= 0.1);
        assert!(report.all_bounds_hold());
    }

    #[test]
    fn infidelity_bound_tracks_ell() {
        // Reported infidelity <= sqrt(8 pi M) e^{-2^{ell-1}} whenever
        // 2^ell >= 4M, checked by direct projection at several ells.
        for (n, m) in [(12usize, 2usize), (16, 3)] {
            let target = make_dicke_state(n, m).unwrap();
            let product = make_product_state(n, m as f64 / n as f64).unwrap();
            for ell in ((2 * m).ilog2() as usize + 1..=exact_ell(n)).take(3) {
                if (1 << ell) < 4 * m {
                    continue;
                }
                let (_, proj) = product
                    .project_excitations_mod(&(0..n).collect::<Vec<_>>(), m % (1 << ell), 1 << ell)
                    .unwrap();
                let infid = proj.infidelity(&target).unwrap();
                let bound = (8.0 * std::f64::consts::PI * m as f64).sqrt()
                    * (-((1u64 << (ell - 1)) as f64)).exp();
                assert!(infid <= bound + 1e-15, "ell={ell}: {infid} > {bound}");
            }
        }
    }

    #[test]
    fn depth_depends_on_epsilon_only_through_ell() {
        // Fixed M: two targets mapping to the same ell give identical trial
        // depths; a smaller target that bumps ell adds exactly seven layers
        // per extra ancilla.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let opts = PrepareOptions {
            postselect: true,
            ..Default::default()
        };
        let depth_for = |eps: f64, rng: &mut ChaCha8Rng| {
            let params = DickeParams::new(12, 2, eps).unwrap();
            let report = prepare_dicke(&params, &opts, rng).unwrap();
            let ell = ell_for_dicke(2, eps).unwrap().min(exact_ell(12));
            (report.ledger.depth(), ell)
        };
        let (d1, l1) = depth_for(0.5, &mut rng);
        let (d2, l2) = depth_for(0.3, &mut rng);
        let (d3, l3) = depth_for(1e-3, &mut rng);
        assert_eq!(l1, l2);
        assert_eq!(d1, d2);
        assert!(l3 > l1);
        assert_eq!(d3 - d1, 7 * (l3 - l1) as u64);
    }

    #[test]
    fn sampled_repetitions_stay_in_markov_band() {
        let params = DickeParams::new(8, 1, 1e-2).unwrap();
        let opts = PrepareOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut total = 0u64;
        let runs = 1000;
        for _ in 0..runs {
            let r = prepare_dicke(&params, &opts, &mut rng).unwrap();
            assert!(r.succeeded);
            total += r.repetitions_used;
        }
        let mean = total as f64 / runs as f64;
        assert!(mean <= 3.0 * (8.0 * std::f64::consts::PI).sqrt());
    }
}
