//! Dressed one-electron states and the spectral bounds around them.

use rayon::prelude::*;

use crate::eigen::{ground_state, SolverOptions, SpectralResult};
use crate::error::{Error, Result};
use crate::fock::basis::OccupationBasis;
use crate::linalg;
use crate::model::{build_fiber_h, DispersionLaw, ModelSpec};
use crate::sparse::{SparseOperator, C64};

/// Probability mass on basis states occupying at least one soft mode.
pub fn soft_boson_occupancy(amps: &[C64], basis: &OccupationBasis) -> f64 {
    let soft = basis.grid().soft_mask();
    (0..basis.dim())
        .filter(|&i| basis.occupation(i).iter().zip(&soft).any(|(&n, &s)| n > 0 && s))
        .map(|i| amps[i].norm_sqr())
        .sum()
}

/// Fiber ground state (`k` lowest pairs) at total momentum `p`.
pub fn fiber_ground_state(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectralResult> {
    ground_state(&build_fiber_h(ms, p, basis)?, k, opts)
}

/// Lowest eigenvalue of the free fiber Hamiltonian on the basis.
pub fn free_ground_energy(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis) -> f64 {
    ms.free_diagonal(p, basis).into_iter().fold(f64::INFINITY, f64::min)
}

/// Second-order Rayleigh-Schroedinger energy
/// `Omega(P) - (g^2/2) sum_j w_j kappa_sigma_j^2 / (Omega(P - k_j) + omega_j - Omega(P))`.
pub fn perturbative_energy(ms: &ModelSpec, p: &[f64; 3]) -> f64 {
    let grid = &ms.grid;
    let omega = ms.omega();
    let e0 = ms.disp.eval(&ms.electron_momentum(p, &[0.0; 3]));
    let mut shift = 0.0;
    for j in 0..grid.n_modes() {
        let kap = ms.ff.kappa_sigma(grid.abs_k(j));
        if kap == 0.0 {
            continue;
        }
        let denom = ms.disp.eval(&ms.electron_momentum(p, &grid.point(j))) + omega[j] - e0;
        shift += grid.weights()[j] * kap * kap / denom;
    }
    e0 - 0.5 * ms.g * ms.g * shift
}

/// One point of a dispersion scan.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub p: [f64; 3],
    pub e_g: f64,
    /// Ground energy of the free fiber Hamiltonian on the same basis.
    pub e_0: f64,
    /// `Omega(P)`
    pub omega_p: f64,
    /// `Omega(P) - E_g(P)`
    pub upper_margin: f64,
    /// `min_alpha [E_g - (1 - alpha) E_0 + g^2 C / alpha]`
    pub lower_margin: f64,
    pub gap: f64,
    pub soft_occupancy: f64,
    /// `|E_g| computed with |k| minus E_g computed with omega|` on the same basis.
    pub free_vs_mod: f64,
    pub within_o_beta: bool,
    pub residual: f64,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DispersionCurve {
    pub points: Vec<CurvePoint>,
    pub beta: f64,
    pub o_beta: f64,
    pub c_const: f64,
}

impl DispersionCurve {
    pub fn min_upper_margin(&self) -> f64 {
        self.points.iter().map(|p| p.upper_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn min_lower_margin(&self) -> f64 {
        self.points.iter().map(|p| p.lower_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn max_soft_occupancy(&self) -> f64 {
        self.points.iter().map(|p| p.soft_occupancy).fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

/// Values of `alpha` used for the lower sandwich bound.
pub fn sandwich_alphas(g: f64) -> Vec<f64> {
    let mut a = vec![0.5, 1.0];
    if g != 0.0 && g.abs() <= 1.0 {
        a.insert(0, g.abs());
    }
    a
}

/// Lower sandwich margin for one point.
pub fn lower_margin(e_g: f64, e_0: f64, g: f64, c: f64) -> f64 {
    sandwich_alphas(g)
        .into_iter()
        .map(|alpha| e_g - ((1.0 - alpha) * e_0 - g * g * c / alpha))
        .fold(f64::INFINITY, f64::min)
}

fn scan_point(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    opts: &SolverOptions,
    o_beta: f64,
    c: f64,
) -> CurvePoint {
    let omega_p = ms.disp.eval(&ms.electron_momentum(p, &[0.0; 3]));
    let e_0 = free_ground_energy(ms, p, basis);
    let mut point = CurvePoint {
        p: *p,
        e_g: f64::NAN,
        e_0,
        omega_p,
        upper_margin: f64::NAN,
        lower_margin: f64::NAN,
        gap: f64::NAN,
        soft_occupancy: f64::NAN,
        free_vs_mod: f64::NAN,
        within_o_beta: omega_p <= o_beta,
        residual: f64::NAN,
        converged: false,
        error: None,
    };
    let main = fiber_ground_state(ms, p, basis, 2, opts);
    let other = fiber_ground_state(&ms.with_modified(!ms.use_modified), p, basis, 1, opts);
    match (main, other) {
        (Ok(r), Ok(o)) => {
            point.e_g = r.ground_energy();
            point.upper_margin = omega_p - r.ground_energy();
            point.lower_margin = lower_margin(r.ground_energy(), e_0, ms.g, c);
            point.gap = r.gap().unwrap_or(f64::NAN);
            point.soft_occupancy = soft_boson_occupancy(r.ground_vector(), basis);
            point.free_vs_mod = (r.ground_energy() - o.ground_energy()).abs();
            point.residual = r.residuals[0];
            point.converged = r.residuals[0] <= 10.0 * opts.tol.max(1e-12);
        }
        (Err(e), _) | (_, Err(e)) => point.error = Some(e.to_string()),
    }
    point
}

/// Ground energies over a list of total momenta, in input order.
pub fn dispersion_scan(
    ms: &ModelSpec,
    ps: &[[f64; 3]],
    basis: &OccupationBasis,
    beta: f64,
    opts: &SolverOptions,
) -> Result<DispersionCurve> {
    let o_beta = ms.disp.o_beta(beta)?;
    let c = ms.c_const();
    let points = ps
        .par_iter()
        .map(|p| scan_point(ms, p, basis, opts, o_beta, c))
        .collect();
    Ok(DispersionCurve {
        points,
        beta,
        o_beta,
        c_const: c,
    })
}

/// Ground energies of `H(P - k_j)` for every grid mode, in grid order.
fn shifted_ground_energies(
    ms: &ModelSpec,
    p: &[f64; 3],
    basis: &OccupationBasis,
    opts: &SolverOptions,
    modes: &[usize],
) -> Result<Vec<f64>> {
    modes
        .par_iter()
        .map(|&j| {
            let k = ms.grid.point(j);
            let q = [p[0] - k[0], p[1] - k[1], p[2] - k[2]];
            Ok(fiber_ground_state(ms, &q, basis, 1, opts)?.ground_energy())
        })
        .collect()
}

/// `min_{|k| >= eps} E_g(P - k) + |k| - E_g(P)` over grid momenta.
pub fn lipschitz_gap(
    ms: &ModelSpec,
    p: &[f64; 3],
    eps: f64,
    basis: &OccupationBasis,
    opts: &SolverOptions,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon = {eps} must be positive")));
    }
    let modes: Vec<usize> = (0..ms.grid.n_modes()).filter(|&j| ms.grid.abs_k(j) >= eps).collect();
    if modes.is_empty() {
        return Err(Error::EmptySubspace(format!("no grid momentum with |k| >= {eps}")));
    }
    let e = fiber_ground_state(ms, p, basis, 1, opts)?.ground_energy();
    let shifted = shifted_ground_energies(ms, p, basis, opts, &modes)?;
    Ok(modes
        .iter()
        .zip(shifted)
        .map(|(&j, es)| es + ms.grid.abs_k(j) - e)
        .fold(f64::INFINITY, f64::min))
}

/// `Delta(P) = min_k E_mod(P - k) + omega(k) - E_mod(P)` over grid momenta.
pub fn delta_gap(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis, opts: &SolverOptions) -> Result<f64> {
    if !ms.use_modified {
        return Err(Error::Precondition("delta_gap is defined for the modified dispersion".into()));
    }
    let modes: Vec<usize> = (0..ms.grid.n_modes()).collect();
    let e = fiber_ground_state(ms, p, basis, 1, opts)?.ground_energy();
    let shifted = shifted_ground_energies(ms, p, basis, opts, &modes)?;
    let omega = ms.omega();
    Ok(modes
        .iter()
        .zip(shifted)
        .map(|(&j, es)| es + omega[j] - e)
        .fold(f64::INFINITY, f64::min))
}

/// Closed-form bound on `|| |grad Omega| E_Sigma ||`:
/// `sqrt(2 (Sigma + g^2 C) / M)` (non-relativistic) or
/// `sqrt(1 - M^2 / (Sigma + g^2 C)^2)` (relativistic).
pub fn grad_bound(disp: &DispersionLaw, level: f64, g: f64, c: f64) -> Result<f64> {
    let s = level + g * g * c;
    match disp {
        DispersionLaw::NonRelativistic { mass } => Ok((2.0 * s.max(0.0) / mass).sqrt()),
        DispersionLaw::Relativistic { mass } => {
            if s <= *mass {
                Ok(0.0)
            } else {
                Ok((1.0 - mass * mass / (s * s)).sqrt())
            }
        }
        DispersionLaw::Tabulated(_) => Err(Error::UnsupportedDispersion(
            "closed-form gradient bound exists only for the built-in dispersions".into(),
        )),
    }
}

/// Whether `Sigma` lies in the window where the gradient bound is below 1/3.
pub fn grad_window(disp: &DispersionLaw, level: f64) -> bool {
    match disp {
        DispersionLaw::NonRelativistic { mass } => level > 0.0 && level < mass / 18.0,
        DispersionLaw::Relativistic { mass } => level > *mass && level < 3.0 * mass / 8f64.sqrt(),
        DispersionLaw::Tabulated(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradBoundReport {
    pub level: f64,
    pub bound: f64,
    /// `|| |grad Omega(P - dGamma(k))| E_Sigma(H(P)) ||`, 0 if the spectral subspace is empty.
    pub measured: f64,
    pub margin: f64,
    pub subspace_dim: usize,
    pub in_window: bool,
}

/// Compares `|| |grad Omega| E_Sigma ||` on one fiber with its closed-form bound.
pub fn grad_bound_check(
    ms: &ModelSpec,
    level: f64,
    p: &[f64; 3],
    basis: &OccupationBasis,
) -> Result<GradBoundReport> {
    let bound = grad_bound(&ms.disp, level, ms.g, ms.c_const())?;
    let h = build_fiber_h(ms, p, basis)?.to_dense();
    let (vals, vecs) = linalg::eigh(&h);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= level).collect();
    let grads: Vec<f64> = ms
        .grad_diagonal(p, basis)
        .iter()
        .map(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
        .collect();
    let measured = if cols.is_empty() {
        0.0
    } else {
        let v = vecs.select_columns(&cols);
        let mut dv = v.clone();
        for (r, g2) in grads.iter().enumerate() {
            for c in 0..cols.len() {
                dv[(r, c)] *= *g2;
            }
        }
        let compressed = v.adjoint() * dv;
        let compressed = (&compressed + compressed.adjoint()) * C64::new(0.5, 0.0);
        linalg::eigh(&compressed).0.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    };
    Ok(GradBoundReport {
        level,
        bound,
        measured,
        margin: bound - measured,
        subspace_dim: cols.len(),
        in_window: grad_window(&ms.disp, level),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumberBound {
    /// Slope used in `N <= a H + b`.
    pub a: f64,
    /// Smallest `b` making the inequality hold on the basis.
    pub b: f64,
    /// `|| (N + 1) (H + i)^{-1} ||`
    pub resolvent_norm: f64,
}

/// Number-energy comparison `N <= a H + b` with `a = (2/sigma)(1 + margin)`.
pub fn number_bound(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis, margin: f64) -> Result<NumberBound> {
    let a = 2.0 / ms.grid.sigma() * (1.0 + margin);
    let h = build_fiber_h(ms, p, basis)?;
    let n: Vec<f64> = (0..basis.dim()).map(|i| basis.total(i) as f64).collect();
    let hd = h.to_dense();
    let diff = SparseOperator::diagonal(&n).to_dense() - &hd * C64::new(a, 0.0);
    let b = linalg::eigh(&diff).0.last().copied().unwrap_or(0.0);
    let (vals, vecs) = linalg::eigh(&hd);
    let res = linalg::hermitian_function(&vals, &vecs, |x| C64::new(1.0, 0.0) / C64::new(x, 1.0));
    let mut nres = res.clone();
    for r in 0..basis.dim() {
        for c in 0..basis.dim() {
            nres[(r, c)] = res[(r, c)] * (n[r] + 1.0);
        }
    }
    Ok(NumberBound {
        a,
        b,
        resolvent_norm: linalg::spectral_norm(&nres),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_bound_examples() {
        let nr = DispersionLaw::NonRelativistic { mass: 1.0 };
        assert!((grad_bound(&nr, 0.1, 0.0, 1.0).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        let rel = DispersionLaw::Relativistic { mass: 1.0 };
        assert!((grad_bound(&rel, 1.25, 0.0, 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert!(grad_window(&nr, 0.05) && !grad_window(&nr, 0.06));
        assert!(grad_window(&rel, 1.05) && !grad_window(&rel, 1.1));
    }

    #[test]
    fn alphas_skip_zero_coupling() {
        assert_eq!(sandwich_alphas(0.0), vec![0.5, 1.0]);
        assert_eq!(sandwich_alphas(-0.05), vec![0.05, 0.5, 1.0]);
    }
}
