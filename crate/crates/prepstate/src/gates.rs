//! Standard gate matrices shared by the protocol modules.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn identity2() -> Matrix2<Complex64> {
    Matrix2::identity()
}

pub fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
    )
}

pub fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, 0.0),
    )
}

pub fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
    )
}

pub fn hadamard() -> Matrix2<Complex64> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix2::new(h, h, h, -h)
}

/// diag(1, e^{i·phi})
pub fn phase(phi: f64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0, phi),
    )
}

/// exp(-i·theta·sigma_y): |0> -> cos(theta)|0> + sin(theta)|1>.
pub fn ry(theta: f64) -> Matrix2<Complex64> {
    let c = Complex64::new(theta.cos(), 0.0);
    let s = Complex64::new(theta.sin(), 0.0);
    Matrix2::new(c, -s, s, c)
}

/// Two-qubit matrix for control⊗target ordered as sub-index = 2·control + target.
pub fn controlled(u0: &Matrix2<Complex64>, u1: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(4, 4);
    for r in 0..2 {
        for c in 0..2 {
            m[(r, c)] = u0[(r, c)];
            m[(r + 2, c + 2)] = u1[(r, c)];
        }
    }
    m
}

/// CNOT in the same sub-index convention (control is the high bit).
pub fn cnot() -> DMatrix<Complex64> {
    controlled(&identity2(), &pauli_x())
}

/// Forward QFT on an `ell`-qubit register: |k> -> 2^{-ell/2} Σ_a e^{2πi·k·a/2^ell} |a>.
pub fn qft(ell: usize) -> DMatrix<Complex64> {
    let dim = 1usize << ell;
    let norm = 1.0 / (dim as f64).sqrt();
    DMatrix::from_fn(dim, dim, |r, c| {
        Complex64::from_polar(
            norm,
            2.0 * std::f64::consts::PI * (r as f64) * (c as f64) / dim as f64,
        )
    })
}

pub fn inverse_qft(ell: usize) -> DMatrix<Complex64> {
    qft(ell).adjoint()
}

/// Haar-ish random single-qubit unitary from Gram-Schmidt on Gaussian columns.
pub fn random_unitary2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<Complex64> {
    let mut g = || {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    };
    let a = (g(), g());
    let na = (a.0.norm_sqr() + a.1.norm_sqr()).sqrt();
    let col0 = (a.0 / na, a.1 / na);
    let mut b = (g(), g());
    let ip = col0.0.conj() * b.0 + col0.1.conj() * b.1;
    b = (b.0 - ip * col0.0, b.1 - ip * col0.1);
    let nb = (b.0.norm_sqr() + b.1.norm_sqr()).sqrt();
    let col1 = (b.0 / nb, b.1 / nb);
    Matrix2::new(col0.0, col1.0, col0.1, col1.1)
}
