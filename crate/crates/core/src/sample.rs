//! Seeded random draws of vectors and mode operators.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::sparse::C64;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    let mut v = vector(rng, n);
    crate::linalg::normalize(&mut v);
    v
}

pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> DMatrix<C64> {
    let a = matrix(rng, n, n);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Haar-like unitary from the QR factorization of a Gaussian matrix.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> DMatrix<C64> {
    let qr = matrix(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Contraction (`||q|| <= 1`) obtained by rescaling a Gaussian matrix.
pub fn contraction<R: Rng>(rng: &mut R, n: usize) -> DMatrix<C64> {
    let m = matrix(rng, n, n);
    let s = crate::linalg::spectral_norm(&m).max(1.0);
    m / C64::new(s, 0.0)
}

/// Random `j = (j0, jinf)` with `j0^* j0 + jinf^* jinf = 1`, not commuting
/// with diagonal mode operators in general.
pub fn isometric_split<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let v = unitary(rng, n);
    let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)).collect();
    let cos = crate::fock::grid::diag_op(&theta.iter().map(|t| t.cos()).collect::<Vec<_>>());
    let sin = crate::fock::grid::diag_op(&theta.iter().map(|t| t.sin()).collect::<Vec<_>>());
    (&v * cos * v.adjoint(), &v * sin * v.adjoint())
}

/// Random `j0` with `jinf = 1 - j0`.
pub fn partition_split<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let j0 = matrix(rng, n, n) * C64::new(0.5, 0.0);
    let jinf = DMatrix::<C64>::identity(n, n) - &j0;
    (j0, jinf)
}
