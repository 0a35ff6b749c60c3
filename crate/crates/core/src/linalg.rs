//! Small dense helpers shared by the solvers and the verification suites.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::sparse::C64;

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Normalizes in place and returns the previous norm.
pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), x);
    }
    n
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Real symmetric input takes the real solver path.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh: square matrix required");
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let real = m.iter().all(|v| v.im == 0.0);
    let (vals, vecs): (Vec<f64>, DMatrix<C64>) = if real {
        let (vals, vecs) = eigh_real(&DMatrix::from_fn(n, n, |i, j| m[(i, j)].re));
        return (vals, vecs.map(|v| C64::new(v, 0.0)));
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

/// Eigen-decomposition of a real symmetric matrix, ascending.
pub fn eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    // Sequential on purpose: results must not depend on the worker count.
    faer::set_global_parallelism(faer::Parallelism::None);
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = a.selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let vals: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| u.read(r, order[c]));
    (sorted_vals, vecs)
}

pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    eigh(m).0.first().copied().unwrap_or(f64::INFINITY)
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `f(H)` for Hermitian `H` from its eigen-decomposition.
pub fn hermitian_function(
    vals: &[f64],
    vecs: &DMatrix<C64>,
    f: impl Fn(f64) -> C64,
) -> DMatrix<C64> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let fl = f(lam);
        for r in 0..n {
            scaled[(r, c)] *= fl;
        }
    }
    scaled * vecs.adjoint()
}

/// Dense `exp(-i H t) x` through the eigen-decomposition of `H`.
pub fn expm_apply_dense(h: &DMatrix<C64>, t: f64, x: &[C64]) -> Vec<C64> {
    let (vals, vecs) = eigh(h);
    let xv = DVector::from_column_slice(x);
    let coeff = vecs.adjoint() * xv;
    let mut out = DVector::zeros(x.len());
    for (k, &lam) in vals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lam * t);
        out += vecs.column(k) * (coeff[k] * phase);
    }
    out.iter().copied().collect()
}

/// Absolute value `|A|` of a Hermitian matrix.
pub fn hermitian_abs(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = eigh(m);
    hermitian_function(&vals, &vecs, |x| C64::new(x.abs(), 0.0))
}

pub fn to_dvector(x: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(x)
}
