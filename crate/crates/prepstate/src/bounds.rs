//! Log-space binomial machinery and the inequality suite backing the
//! protocol guarantees (Stirling sandwich, Chernoff tail, relative entropy).

use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 4096;

/// ln(n!) via a cached cumulative table (exact to f64 rounding for the sizes
/// used here).
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE + 1);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..=LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    assert!(n <= LN_FACT_TABLE, "ln_factorial table exceeded: {n}");
    table[n]
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// C(n,k) p^k (1-p)^{n-k}, evaluated in log space away from the p = 0, 1
/// edges.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Pr[X >= k0] for X ~ Binomial(n, p), summed exactly.
pub fn binomial_tail_ge(n: usize, k0: usize, p: f64) -> f64 {
    (k0..=n).map(|k| binomial_pmf(n, k, p)).sum()
}

/// Bernoulli relative entropy D(a || p) = a ln(a/p) + (1-a) ln((1-a)/(1-p)),
/// with the 0·ln 0 = 0 convention.
pub fn relative_entropy(a: f64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&p));
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, p) + term(1.0 - a, 1.0 - p)
}

/// Two-sided Stirling estimate for the central binomial weight at p = M/N:
/// returns (lower, value, upper) with
/// lower = (1/2)·sqrt(N / (2π M (N-M))) and upper = 4·lower; the value lies
/// strictly between them for all 0 < M < N.
pub fn stirling_sandwich(n: usize, m: usize) -> (f64, f64, f64) {
    assert!(m > 0 && m < n);
    let p = m as f64 / n as f64;
    let value = binomial_pmf(n, m, p);
    let lower = 0.5 * (n as f64 / (2.0 * std::f64::consts::PI * m as f64 * (n - m) as f64)).sqrt();
    (lower, value, 4.0 * lower)
}

/// Chernoff upper bound on Pr[e >= m + 2^ell] for e ~ Binomial(n, m/n).
/// Returns (exact tail, bound). When m + 2^ell > n the tail is empty and the
/// bound is reported as 0 too (trivially satisfied).
pub fn chernoff_excess_tail(n: usize, m: usize, ell: usize) -> (f64, f64) {
    let threshold = m + (1usize << ell);
    if threshold > n {
        return (0.0, 0.0);
    }
    let p = m as f64 / n as f64;
    let tail = binomial_tail_ge(n, threshold, p);
    let a = threshold as f64 / n as f64;
    let bound = (-(n as f64) * relative_entropy(a, p)).exp();
    (tail, bound)
}

/// Success weight of the residue-M sector of Binomial(N, M/N) modulo 2^ell:
/// the analytic acceptance probability of the repeat-until-success Dicke
/// preparation.
pub fn dicke_sector_probability(n: usize, m: usize, ell: usize) -> f64 {
    let p = m as f64 / n as f64;
    let modulus = 1usize << ell;
    (0..=n)
        .filter(|e| e % modulus == m % modulus)
        .map(|e| binomial_pmf(n, e, p))
        .sum()
}
