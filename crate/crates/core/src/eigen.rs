//! Lowest eigenpairs of Hermitian sparse operators.
//!
//! Small problems are diagonalized densely. Larger ones use Lanczos with
//! full reorthogonalization, restarted from the current Ritz vectors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::{SparseOperator, C64};

/// Dimension below which the dense solver is used.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Krylov basis size per restart cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Force Lanczos even below [`DENSE_LIMIT`].
    pub force_lanczos: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            krylov_dim: 160,
            max_restarts: 60,
            force_lanczos: false,
        }
    }
}

/// Eigenpairs in ascending order with their residuals.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
    /// `||H v - lambda v||` per pair.
    pub residuals: Vec<f64>,
    pub solver: SolverKind,
    pub iterations: usize,
    pub tol: f64,
    pub dim: usize,
}

impl SpectralResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_vector(&self) -> &[C64] {
        &self.eigenvectors[0]
    }

    /// `lambda_2 - lambda_1`, if two pairs were computed.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() > 1).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }

    /// Gap above the numerical noise floor `1e-8 (1 + |lambda_1|)`.
    pub fn is_simple(&self) -> Option<bool> {
        self.gap().map(|g| g > 1e-8 * (1.0 + self.eigenvalues[0].abs()))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Rotates `v` so that its component `i` (or, if that vanishes, its largest
/// component) is real and non-negative.
pub fn fix_phase(v: &mut [C64], i: usize) {
    let pivot = if v[i].norm() > 1e-300 {
        i
    } else {
        let mut best = 0;
        for (j, x) in v.iter().enumerate() {
            if x.norm() > v[best].norm() {
                best = j;
            }
        }
        best
    };
    let z = v[pivot];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

fn residual(h: &SparseOperator, lambda: f64, v: &[C64]) -> f64 {
    let hv = h.matvec(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// The `k` lowest eigenpairs of `h`.
pub fn ground_state(h: &SparseOperator, k: usize, opts: &SolverOptions) -> Result<SpectralResult> {
    if !h.is_hermitian() {
        return Err(Error::Precondition("eigensolver needs a Hermitian-flagged operator".into()));
    }
    let n = h.rows();
    if n == 0 || k == 0 {
        return Err(Error::EmptySubspace("no eigenpairs requested or empty operator".into()));
    }
    let k = k.min(n);
    let mut out = if n < DENSE_LIMIT && !opts.force_lanczos {
        dense(h, k, opts)
    } else {
        lanczos(h, k, opts)?
    };
    for v in out.eigenvectors.iter_mut() {
        fix_phase(v, 0);
    }
    Ok(out)
}

fn dense(h: &SparseOperator, k: usize, opts: &SolverOptions) -> SpectralResult {
    let (vals, vecs) = linalg::eigh(&h.to_dense());
    let eigenvectors: Vec<Vec<C64>> = (0..k).map(|c| vecs.column(c).iter().copied().collect()).collect();
    let residuals = eigenvectors
        .iter()
        .zip(&vals)
        .map(|(v, &l)| residual(h, l, v))
        .collect();
    SpectralResult {
        eigenvalues: vals[..k].to_vec(),
        eigenvectors,
        residuals,
        solver: SolverKind::Dense,
        iterations: 0,
        tol: opts.tol,
        dim: h.rows(),
    }
}

/// Deterministic start: vacuum plus a small, fixed perturbation.
fn start_vector(n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1e-3 * ((i as f64 + 1.0) * 0.7548776662).sin(), 0.0))
        .collect();
    v[0] += C64::new(1.0, 0.0);
    linalg::normalize(&mut v);
    v
}

fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for q in basis {
            let c = linalg::dot(q, w);
            linalg::axpy(-c, q, w);
        }
    }
}

fn lanczos(h: &SparseOperator, k: usize, opts: &SolverOptions) -> Result<SpectralResult> {
    let n = h.rows();
    let m_max = opts.krylov_dim.max(k + 10).min(n);
    let mut starts: Vec<Vec<C64>> = vec![start_vector(n)];
    let mut iterations = 0;
    let mut last_res = f64::INFINITY;
    for _ in 0..=opts.max_restarts {
        // Krylov space seeded by the kept vectors (thick restart, Rayleigh-Ritz on the span).
        let mut q: Vec<Vec<C64>> = Vec::with_capacity(m_max + k);
        for s in &starts {
            let mut v = s.clone();
            orthogonalize(&mut v, &q);
            if linalg::normalize(&mut v) > 1e-12 {
                q.push(v);
            }
        }
        let mut hq: Vec<Vec<C64>> = q.iter().map(|v| h.matvec(v)).collect();
        iterations += hq.len();
        while q.len() < m_max {
            let mut w = hq.last().unwrap().clone();
            orthogonalize(&mut w, &q);
            let beta = linalg::normalize(&mut w);
            if beta < 1e-13 {
                // Invariant subspace; add a fresh deterministic direction.
                let mut e: Vec<C64> = (0..n)
                    .map(|i| C64::new(((i * 7919 + q.len() * 104729) % 1009) as f64 - 504.0, 0.0))
                    .collect();
                orthogonalize(&mut e, &q);
                if linalg::normalize(&mut e) < 1e-12 {
                    break;
                }
                w = e;
            }
            hq.push(h.matvec(&w));
            q.push(w);
            iterations += 1;
        }
        let m = q.len();
        let t = DMatrix::from_fn(m, m, |i, j| linalg::dot(&q[i], &hq[j]));
        let t = (&t + t.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = linalg::eigh(&t);
        let kk = k.min(m);
        let mut ritz = Vec::with_capacity(kk);
        let mut res = Vec::with_capacity(kk);
        for c in 0..kk {
            let mut x = vec![C64::new(0.0, 0.0); n];
            let mut hx = vec![C64::new(0.0, 0.0); n];
            for (i, qi) in q.iter().enumerate() {
                let coef = vecs[(i, c)];
                linalg::axpy(coef, qi, &mut x);
                linalg::axpy(coef, &hq[i], &mut hx);
            }
            let r = hx
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b * vals[c]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            ritz.push(x);
            res.push(r);
        }
        last_res = res.iter().copied().fold(0.0, f64::max);
        if last_res <= opts.tol || m == n {
            let residuals = ritz.iter().zip(&vals).map(|(v, &l)| residual(h, l, v)).collect();
            return Ok(SpectralResult {
                eigenvalues: vals[..kk].to_vec(),
                eigenvectors: ritz,
                residuals,
                solver: SolverKind::Lanczos,
                iterations,
                tol: opts.tol,
                dim: n,
            });
        }
        // Keep a few extra Ritz vectors to speed up the next cycle.
        let keep = (kk + 8).min(m);
        starts = (0..keep)
            .map(|c| {
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (i, qi) in q.iter().enumerate() {
                    linalg::axpy(vecs[(i, c)], qi, &mut x);
                }
                x
            })
            .collect();
    }
    Err(Error::NoConvergence {
        iterations,
        residual: last_res,
        tol: opts.tol,
    })
}
