//! Conjugate operator `A = dGamma(a)`, the commutator `[iH, A]`, and numerical
//! probes of the virial theorem and of positive-commutator bounds.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::eigen::{ground_state, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::basis::OccupationBasis;
use crate::fock::grid::{GridLayout, ModeGrid};
use crate::fock::ops::{dgamma, dgamma_diag, field_from_coords, number_op};
use crate::linalg;
use crate::model::{build_fiber_h, ModelSpec};
use crate::sample;
use crate::sparse::{SparseOperator, C64};
use crate::stats;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Node spacing used by the finite-difference position operator.
pub fn mesh(grid: &ModeGrid) -> Result<f64> {
    match grid.layout() {
        GridLayout::Line { spacing } => Ok(*spacing),
        GridLayout::Lattice { sites, spacing, .. } => Ok(2.0 * std::f64::consts::PI / (*sites as f64 * spacing)),
        GridLayout::Radial { .. } => Ok(2.0 * grid.abs_k(0)),
        other => Err(Error::UnsupportedGrid(format!("no finite-difference stencil for layout {other:?}"))),
    }
}

/// Position operator in the orthonormal mode basis.
///
/// On one-dimensional grids this is `y = i d/dk`; on radial grids it is the
/// radial part `khat . y`, which in orthonormal coordinates `r h(r)` becomes
/// `i d/dr` along each direction. Both use antisymmetric central differences
/// `D_{j,j'} = 1 / (2 s)`, `s = k_{j'} - k_j`, with zero extension past the ends,
/// so the matrix is exactly Hermitian.
pub fn build_position_op(grid: &ModeGrid) -> Result<DMatrix<C64>> {
    let m = grid.n_modes();
    let mut y = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    let mut link = |j: usize, l: usize, s: f64| {
        let d = 0.5 / s;
        y[(j, l)] = I * d;
        y[(l, j)] = -I * d;
    };
    match grid.layout() {
        GridLayout::Line { .. } | GridLayout::Lattice { .. } => {
            for j in 0..m.saturating_sub(1) {
                link(j, j + 1, grid.point(j + 1)[0] - grid.point(j)[0]);
            }
        }
        GridLayout::Radial { n_radial, n_dirs } => {
            for shell in 0..n_radial.saturating_sub(1) {
                for d in 0..*n_dirs {
                    let j = shell * n_dirs + d;
                    let l = j + n_dirs;
                    link(j, l, grid.abs_k(l) - grid.abs_k(j));
                }
            }
        }
        other => {
            return Err(Error::UnsupportedGrid(format!(
                "no finite-difference stencil for layout {other:?}"
            )))
        }
    }
    Ok(y)
}

/// `a = (grad omega . y + y . grad omega) / 2` and its second quantization.
#[derive(Debug, Clone)]
pub struct ConjugateOp {
    pub y_op: DMatrix<C64>,
    pub a_op: DMatrix<C64>,
    pub a: SparseOperator,
    /// Component of `grad omega(k_j)` along the stencil direction.
    pub speed: Vec<f64>,
}

impl ConjugateOp {
    pub fn new(basis: &OccupationBasis, use_modified: bool) -> Result<Self> {
        let grid = basis.grid();
        let y_op = build_position_op(grid)?;
        let radial = matches!(grid.layout(), GridLayout::Radial { .. });
        let speed: Vec<f64> = (0..grid.n_modes())
            .map(|j| {
                let g = grid.grad_omega(j, use_modified);
                if radial {
                    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
                } else {
                    g[0]
                }
            })
            .collect();
        let m = grid.n_modes();
        // Entrywise, so that conjugate symmetry is exact in floating point.
        let a_op = DMatrix::from_fn(m, m, |i, j| y_op[(i, j)] * (0.5 * (speed[i] + speed[j])));
        let a = dgamma(basis, &a_op)?;
        Ok(ConjugateOp { y_op, a_op, a, speed })
    }
}

/// Orthonormal coordinates of `i a kappa_sigma`.
fn rotated_coupling(ms: &ModelSpec, conj: &ConjugateOp) -> Result<Vec<C64>> {
    let coords = ms.grid.coords(&ms.ff.samples(&ms.grid))?;
    let v = &conj.a_op * nalgebra::DVector::from_vec(coords);
    Ok(v.iter().map(|x| I * x).collect())
}

/// Continuum formula
/// `[iH, A] = dGamma(|grad omega|^2) - grad Omega(P - dGamma(k)) . dGamma(grad omega) - g phi(i a kappa_sigma)`.
pub fn commutator_iha(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis, conj: &ConjugateOp) -> Result<SparseOperator> {
    let grid = basis.grid();
    let g2: Vec<f64> = conj.speed.iter().map(|v| v * v).collect();
    let mut d: Vec<f64> = dgamma_diag(basis, &g2)?.diagonal_entries().iter().map(|x| x.re).collect();
    let grad = ms.grad_diagonal(p, basis);
    for axis in 0..grid.dim() {
        let comp: Vec<f64> = (0..grid.n_modes())
            .map(|j| grid.grad_omega(j, ms.use_modified)[axis])
            .collect();
        let drift = dgamma_diag(basis, &comp)?.diagonal_entries();
        for (i, x) in d.iter_mut().enumerate() {
            *x -= grad[i][axis] * drift[i].re;
        }
    }
    let mut out = SparseOperator::diagonal(&d);
    if ms.g != 0.0 {
        let phi = field_from_coords(basis, &rotated_coupling(ms, conj)?)?;
        out = out.linear_combination(C64::new(1.0, 0.0), &phi, C64::new(-ms.g, 0.0));
    }
    Ok(out.with_hermitian(true))
}

/// Term-wise commutator of the truncated operators: `dGamma(i[omega, a])`,
/// `i (Omega(P - K_row) - Omega(P - K_col)) A_{row,col}`, and
/// `-g phi(i a kappa_sigma)`. Equals `i(HA - AH)` on the guarded sector.
pub fn commutator_discrete(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    conj: &ConjugateOp,
) -> Result<SparseOperator> {
    let omega = ms.omega();
    let m = basis.n_modes();
    let wa = DMatrix::from_fn(m, m, |i, j| I * conj.a_op[(i, j)] * (omega[i] - omega[j]));
    let mut out = dgamma(basis, &wa)?;
    let el: Vec<f64> = (0..basis.dim())
        .map(|i| ms.disp.eval(&ms.electron_momentum(p, &basis.momentum(i))))
        .collect();
    let t: Vec<(usize, usize, C64)> = conj
        .a
        .triplets()
        .map(|(r, c, v)| (r, c, I * v * (el[r] - el[c])))
        .collect();
    out = out.add(&SparseOperator::from_triplets(basis.dim(), basis.dim(), t, false));
    if ms.g != 0.0 {
        let phi = field_from_coords(basis, &rotated_coupling(ms, conj)?)?;
        out = out.linear_combination(C64::new(1.0, 0.0), &phi, C64::new(-ms.g, 0.0));
    }
    Ok(out.with_hermitian(true))
}

/// `i (H A - A H)` by sparse products.
pub fn commutator_numeric(h: &SparseOperator, a: &SparseOperator) -> SparseOperator {
    h.commutator(a).scale(I)
}

/// `|<psi, C psi>| / ||psi||^2`.
pub fn virial_residual(comm: &SparseOperator, psi: &[C64]) -> f64 {
    let n = linalg::dot(psi, psi).re;
    if n == 0.0 {
        return 0.0;
    }
    comm.expectation(psi).re.abs() / n
}

/// Virial probe on the computed fiber ground state.
#[derive(Debug, Clone)]
pub struct VirialReport {
    /// With the continuum commutator formula.
    pub residual: f64,
    /// With the term-wise commutator of the truncated operators.
    pub residual_discrete: f64,
    pub eigen_residual: f64,
    pub mesh: f64,
    /// `|<psi, (C_explicit - C_discrete) psi>| / mesh^2`.
    pub scale: f64,
    /// Weight of `psi` outside the soft-free subspace.
    pub soft_weight: f64,
}

impl VirialReport {
    /// `residual <= factor (eigen_residual + mesh^2 scale)`.
    pub fn within(&self, factor: f64) -> bool {
        self.residual <= factor * (self.eigen_residual + self.mesh * self.mesh * self.scale)
    }
}

pub fn virial_check(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis, opts: &SolverOptions) -> Result<VirialReport> {
    let conj = ConjugateOp::new(basis, ms.use_modified)?;
    let h = build_fiber_h(ms, p, basis)?;
    let r = ground_state(&h, 1, opts)?;
    let psi = r.ground_vector();
    let soft = basis.soft_free_indices();
    let mut kept = vec![C64::new(0.0, 0.0); psi.len()];
    for &i in &soft {
        kept[i] = psi[i];
    }
    let soft_weight = linalg::norm(&linalg::sub(psi, &kept)).powi(2);
    let explicit = commutator_iha(ms, p, basis, &conj)?;
    let discrete = commutator_discrete(ms, p, basis, &conj)?;
    let e = explicit.expectation(&kept).re;
    let d = discrete.expectation(&kept).re;
    let n = linalg::dot(&kept, &kept).re;
    let mesh = mesh(basis.grid())?;
    Ok(VirialReport {
        residual: e.abs() / n,
        residual_discrete: d.abs() / n,
        eigen_residual: r.residuals[0],
        mesh,
        scale: (e - d).abs() / n / (mesh * mesh),
        soft_weight,
    })
}

/// One random vector of a Mourre scan.
#[derive(Debug, Clone, Copy)]
pub struct MourreSample {
    /// `<phi, [iH, A] phi> - (1 - beta) <phi, N phi>`
    pub r: f64,
    /// Interaction part `<phi, g phi(i a kappa_sigma) phi>`.
    pub q: f64,
    pub number: f64,
}

#[derive(Debug, Clone)]
pub struct MourreReport {
    pub g: f64,
    pub window: f64,
    /// `|| |grad Omega| E_window ||`, measured on the window.
    pub beta: f64,
    /// Number of eigenvectors spanning the sampled window.
    pub window_dim: usize,
    pub ground_energy: f64,
    pub min_r: f64,
    /// `max |q|` over samples.
    pub deficit: f64,
    /// `|| E g phi(i a kappa_sigma) E ||` on the window, the sharp sample bound.
    pub form_bound: f64,
    /// `form_bound / |g|`; `NaN` at `g = 0`.
    pub fitted_c: f64,
    pub samples: Vec<MourreSample>,
    pub mesh: f64,
    pub dim: usize,
    pub n_max: usize,
}

/// Dense largest dimension accepted by [`mourre_scan`].
pub const MOURRE_DENSE_LIMIT: usize = 2000;

/// Subspace on which spectral windows are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// States without soft bosons.
    SoftFree,
    /// The whole truncated Fock space.
    Full,
}

/// Eigen-decomposition of `H` on a sector.
struct SoftFreeSpectrum {
    idx: Vec<usize>,
    vals: Vec<f64>,
    vecs: DMatrix<C64>,
}

fn soft_free_spectrum(h: &SparseOperator, basis: &OccupationBasis, sector: Sector) -> Result<SoftFreeSpectrum> {
    let idx = match sector {
        Sector::SoftFree => basis.soft_free_indices(),
        Sector::Full => (0..basis.dim()).collect(),
    };
    if idx.len() > MOURRE_DENSE_LIMIT {
        return Err(Error::InvalidConfig(format!(
            "sector dimension {} exceeds the dense limit {MOURRE_DENSE_LIMIT}",
            idx.len()
        )));
    }
    let hs = h.restrict(&idx, &idx).to_dense();
    let (vals, vecs) = linalg::eigh(&hs);
    Ok(SoftFreeSpectrum { idx, vals, vecs })
}

/// Eigenvalues of `H` restricted to the soft-free subspace lying at or below `window`.
pub fn eigenvalue_count(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis, window: f64) -> Result<usize> {
    let sp = soft_free_spectrum(&build_fiber_h(ms, p, basis)?, basis, Sector::SoftFree)?;
    Ok(sp.vals.iter().filter(|&&v| v <= window).count())
}

/// Samples random `phi` in `E_window(H)` on a sector, orthogonal to the
/// ground state, and evaluates the Mourre form on each.
#[allow(clippy::too_many_arguments)]
pub fn mourre_scan(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    sector: Sector,
    window: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MourreReport> {
    let conj = ConjugateOp::new(basis, ms.use_modified)?;
    let h = build_fiber_h(ms, p, basis)?;
    let sp = soft_free_spectrum(&h, basis, sector)?;
    let cols: Vec<usize> = (1..sp.vals.len()).filter(|&c| sp.vals[c] <= window).collect();
    if cols.is_empty() {
        return Err(Error::EmptySubspace(format!(
            "no eigenvalue in ({}, {window}] above the ground state",
            sp.vals[0]
        )));
    }
    let full = |c: usize| -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); basis.dim()];
        for (k, &i) in sp.idx.iter().enumerate() {
            v[i] = sp.vecs[(k, c)];
        }
        v
    };
    let window_vecs: Vec<Vec<C64>> = cols.iter().map(|&c| full(c)).collect();

    // beta^2 = largest eigenvalue of E |grad Omega|^2 E on the window.
    let g2: Vec<f64> = ms.grad_diagonal(p, basis).iter().map(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).collect();
    let grad_sq = SparseOperator::diagonal(&g2);
    let gv: Vec<Vec<C64>> = window_vecs.iter().map(|v| grad_sq.matvec(v)).collect();
    let proj = DMatrix::from_fn(cols.len(), cols.len(), |a, b| linalg::dot(&window_vecs[a], &gv[b]));
    let proj = (&proj + proj.adjoint()) * C64::new(0.5, 0.0);
    let beta = linalg::eigh(&proj).0.last().copied().unwrap_or(0.0).max(0.0).sqrt();

    let comm = commutator_iha(ms, p, basis, &conj)?;
    let number = number_op(basis);
    let inter = if ms.g != 0.0 {
        Some(field_from_coords(basis, &rotated_coupling(ms, &conj)?)?.scale_real(ms.g))
    } else {
        None
    };
    let samples: Vec<MourreSample> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample::rng(seed.wrapping_add(s as u64));
            let coef = sample::unit_vector(&mut rng, cols.len());
            let mut phi = vec![C64::new(0.0, 0.0); basis.dim()];
            for (c, v) in coef.iter().zip(&window_vecs) {
                linalg::axpy(*c, v, &mut phi);
            }
            let n = number.expectation(&phi).re;
            MourreSample {
                r: comm.expectation(&phi).re - (1.0 - beta) * n,
                q: inter.as_ref().map_or(0.0, |op| op.expectation(&phi).re),
                number: n,
            }
        })
        .collect();
    let min_r = samples.iter().map(|s| s.r).fold(f64::INFINITY, f64::min);
    let deficit = samples.iter().map(|s| s.q.abs()).fold(0.0, f64::max);
    let form_bound = match &inter {
        Some(op) => {
            let qv: Vec<Vec<C64>> = window_vecs.iter().map(|v| op.matvec(v)).collect();
            let qm = DMatrix::from_fn(cols.len(), cols.len(), |a, b| linalg::dot(&window_vecs[a], &qv[b]));
            let qm = (&qm + qm.adjoint()) * C64::new(0.5, 0.0);
            linalg::eigh(&qm).0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        }
        None => 0.0,
    };
    Ok(MourreReport {
        g: ms.g,
        window,
        beta,
        window_dim: cols.len(),
        ground_energy: sp.vals[0],
        min_r,
        deficit,
        form_bound,
        fitted_c: if ms.g == 0.0 { f64::NAN } else { form_bound / ms.g.abs() },
        samples,
        mesh: mesh(basis.grid())?,
        dim: basis.dim(),
        n_max: basis.n_max(),
    })
}

/// Scan over couplings with the log-log slope of the deficit.
#[derive(Debug, Clone)]
pub struct MourreSweep {
    pub reports: Vec<MourreReport>,
    /// Slope of `log form_bound` against `log |g|` over nonzero couplings.
    pub slope: f64,
    /// Largest `form_bound / |g|`.
    pub fitted_c: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn mourre_sweep(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    sector: Sector,
    window: f64,
    couplings: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<MourreSweep> {
    let reports = couplings
        .par_iter()
        .map(|&g| mourre_scan(&ms.with_coupling(g), p, basis, sector, window, n_samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let nz: Vec<&MourreReport> = reports.iter().filter(|r| r.g != 0.0 && r.form_bound > 0.0).collect();
    let xs: Vec<f64> = nz.iter().map(|r| r.g.abs()).collect();
    let ys: Vec<f64> = nz.iter().map(|r| r.form_bound).collect();
    let slope = if xs.len() >= 2 {
        stats::power_law_exponent(&xs, &ys)
    } else {
        f64::NAN
    };
    let fitted_c = nz.iter().map(|r| r.fitted_c).fold(f64::NAN, f64::max);
    Ok(MourreSweep {
        reports,
        slope,
        fitted_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::build_basis;
    use crate::model::{DispersionLaw, FormFactor};
    use std::sync::Arc;

    fn setup(m: usize, n_max: usize, g: f64) -> (ModelSpec, OccupationBasis) {
        let grid = Arc::new(ModeGrid::line(m, 1.5, 0.2).unwrap());
        let basis = build_basis(grid.clone(), n_max, None).unwrap();
        let ff = FormFactor::new(1.0, 1.5, 0.2).unwrap();
        let ms = ModelSpec::new(DispersionLaw::NonRelativistic { mass: 1.0 }, ff, grid, g, false).unwrap();
        (ms, basis)
    }

    #[test]
    fn position_op_is_hermitian() {
        let (_, basis) = setup(8, 1, 0.0);
        let y = build_position_op(basis.grid()).unwrap();
        assert_eq!(y.clone(), y.adjoint());
    }

    #[test]
    fn union_grid_is_rejected() {
        let a = ModeGrid::line(2, 1.0, 0.1).unwrap();
        let grid = ModeGrid::disjoint_union(&a, &a).unwrap();
        assert!(matches!(build_position_op(&grid), Err(Error::UnsupportedGrid(_))));
    }

    #[test]
    fn commutator_vanishes_on_vacuum() {
        let (ms, basis) = setup(6, 2, 0.3);
        let conj = ConjugateOp::new(&basis, false).unwrap();
        let c = commutator_iha(&ms, &[0.1, 0.0, 0.0], &basis, &conj).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); basis.dim()];
        v[0] = C64::new(1.0, 0.0);
        assert!(c.expectation(&v).norm() < 1e-15);
    }

    #[test]
    fn discrete_commutator_matches_matrix_commutator() {
        let (ms, basis) = setup(6, 3, 0.4);
        let p = [0.2, 0.0, 0.0];
        let conj = ConjugateOp::new(&basis, false).unwrap();
        let h = build_fiber_h(&ms, &p, &basis).unwrap();
        let guard = basis.guarded_mask();
        let num = commutator_numeric(&h, &conj.a).mask_columns(&guard);
        let dis = commutator_discrete(&ms, &p, &basis, &conj).unwrap().mask_columns(&guard);
        assert!(num.sub(&dis).max_abs() < 1e-12);
    }

    #[test]
    fn mourre_form_is_nonnegative_without_coupling() {
        let (ms, basis) = setup(8, 2, 0.0);
        let rep = mourre_scan(&ms, &[0.0; 3], &basis, Sector::SoftFree, 1.0, 16, 3).unwrap();
        assert!(rep.min_r >= -1e-12, "{}", rep.min_r);
        assert!(rep.beta < 1.0);
    }

    #[test]
    fn empty_window_is_reported() {
        let (ms, basis) = setup(4, 1, 0.0);
        assert!(matches!(
            mourre_scan(&ms, &[0.0; 3], &basis, Sector::SoftFree, -1.0, 4, 0),
            Err(Error::EmptySubspace(_))
        ));
    }
}
