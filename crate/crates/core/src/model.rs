//! Electron dispersions, form factors and the fiber / full Hamiltonians.
//!
//! The interaction is `g phi(kappa_sigma)` with `phi(h) = (a(h) + a^*(h)) / sqrt(2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::cutoff::rise;
use crate::error::{Error, Result};
use crate::fock::basis::OccupationBasis;
use crate::fock::grid::{GridLayout, ModeGrid};
use crate::sparse::{SparseOperator, C64};

fn norm3(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Radially symmetric dispersion sampled on `0 = p_0 < p_1 < ...` and
/// interpolated by a cubic spline with zero slope at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    p: Vec<f64>,
    v: Vec<f64>,
    m: Vec<f64>,
}

impl RadialTable {
    /// Validates and splines a table. The table must start at `p = 0`, be
    /// strictly increasing in `p`, non-negative and non-decreasing in value.
    pub fn new(p: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::UnsupportedDispersion(msg));
        if p.len() != v.len() || p.len() < 3 {
            return bad(format!("table needs >= 3 matching samples, got {} and {}", p.len(), v.len()));
        }
        if p[0] != 0.0 {
            return bad("table must start at p = 0".into());
        }
        if p.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("momenta must be strictly increasing".into());
        }
        if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return bad("dispersion values must be finite and non-negative".into());
        }
        if let Some(i) = v.windows(2).position(|w| w[1] < w[0]) {
            return bad(format!(
                "dispersion decreases between p = {} and p = {}; O_beta is undefined",
                p[i],
                p[i + 1]
            ));
        }
        let m = spline_second_derivatives(&p, &v);
        Ok(RadialTable { p, v, m })
    }

    fn locate(&self, r: f64) -> usize {
        match self.p.partition_point(|&x| x <= r) {
            0 => 0,
            i => (i - 1).min(self.p.len() - 2),
        }
    }

    fn end_slope(&self) -> f64 {
        self.deriv(*self.p.last().unwrap())
    }

    pub fn value(&self, r: f64) -> f64 {
        let last = *self.p.last().unwrap();
        if r > last {
            return self.v[self.v.len() - 1] + self.end_slope() * (r - last);
        }
        let i = self.locate(r);
        let h = self.p[i + 1] - self.p[i];
        let a = (self.p[i + 1] - r) / h;
        let b = (r - self.p[i]) / h;
        a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let last = *self.p.last().unwrap();
        let r = r.min(last);
        let i = self.locate(r);
        let h = self.p[i + 1] - self.p[i];
        let a = (self.p[i + 1] - r) / h;
        let b = (r - self.p[i]) / h;
        (self.v[i + 1] - self.v[i]) / h - (3.0 * a * a - 1.0) * h * self.m[i] / 6.0
            + (3.0 * b * b - 1.0) * h * self.m[i + 1] / 6.0
    }

    fn second(&self, r: f64) -> f64 {
        let i = self.locate(r);
        let h = self.p[i + 1] - self.p[i];
        let a = (self.p[i + 1] - r) / h;
        a * self.m[i] + (1.0 - a) * self.m[i + 1]
    }

    /// Fine sample points covering the table.
    fn fine(&self) -> impl Iterator<Item = f64> + '_ {
        self.p.windows(2).flat_map(|w| (0..64).map(move |s| w[0] + (w[1] - w[0]) * s as f64 / 64.0))
    }
}

/// Clamped (zero slope at the origin) / natural cubic spline moments.
fn spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = h0 / 3.0;
    sup[0] = h0 / 6.0;
    rhs[0] = (y[1] - y[0]) / h0;
    for i in 1..n - 1 {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    diag[n - 1] = 1.0;
    // Thomas algorithm.
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Electron kinetic energy `Omega(p)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionLaw {
    /// `p^2 / 2M`
    NonRelativistic { mass: f64 },
    /// `sqrt(p^2 + M^2)`
    Relativistic { mass: f64 },
    Tabulated(RadialTable),
}

impl DispersionLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            DispersionLaw::NonRelativistic { mass } | DispersionLaw::Relativistic { mass } => {
                if !(*mass > 0.0 && mass.is_finite()) {
                    return Err(Error::InvalidConfig(format!("electron mass {mass}")));
                }
            }
            DispersionLaw::Tabulated(_) => {}
        }
        Ok(())
    }

    /// `Omega` as a function of `|p|`.
    pub fn radial(&self, r: f64) -> f64 {
        match self {
            DispersionLaw::NonRelativistic { mass } => r * r / (2.0 * mass),
            DispersionLaw::Relativistic { mass } => (r * r + mass * mass).sqrt(),
            DispersionLaw::Tabulated(t) => t.value(r),
        }
    }

    /// `d Omega / d|p|`.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        match self {
            DispersionLaw::NonRelativistic { mass } => r / mass,
            DispersionLaw::Relativistic { mass } => r / (r * r + mass * mass).sqrt(),
            DispersionLaw::Tabulated(t) => t.deriv(r),
        }
    }

    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        self.radial(norm3(p))
    }

    pub fn grad(&self, p: &[f64; 3]) -> [f64; 3] {
        let r = norm3(p);
        if r == 0.0 {
            return [0.0; 3];
        }
        let d = self.radial_deriv(r) / r;
        [d * p[0], d * p[1], d * p[2]]
    }

    pub fn inf(&self) -> f64 {
        self.radial(0.0)
    }

    /// `B = sup ||d^2 Omega||`.
    pub fn hessian_bound(&self) -> f64 {
        match self {
            DispersionLaw::NonRelativistic { mass } | DispersionLaw::Relativistic { mass } => 1.0 / mass,
            DispersionLaw::Tabulated(t) => t
                .fine()
                .map(|r| {
                    let tangential = if r > 0.0 { t.deriv(r) / r } else { t.second(0.0) };
                    t.second(r).abs().max(tangential.abs())
                })
                .fold(0.0, f64::max),
        }
    }

    /// `O_beta`: the largest level below which `|grad Omega| <= beta`.
    ///
    /// Infinite when the bound never fails (relativistic with `beta >= 1`).
    pub fn o_beta(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta = {beta} must be positive")));
        }
        Ok(match self {
            DispersionLaw::NonRelativistic { mass } => 0.5 * mass * beta * beta,
            DispersionLaw::Relativistic { mass } => {
                if beta >= 1.0 {
                    f64::INFINITY
                } else {
                    mass / (1.0 - beta * beta).sqrt()
                }
            }
            DispersionLaw::Tabulated(t) => {
                // Monotone table: O_beta = Omega at the first radius whose slope reaches beta.
                match t.fine().find(|&r| t.deriv(r) >= beta) {
                    Some(r) => {
                        // Refine the crossing by bisection.
                        let (mut lo, mut hi) = (0.0f64.max(r - (t.p[1] - t.p[0])), r);
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if t.deriv(mid) >= beta {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        t.value(lo)
                    }
                    None if t.end_slope() < beta => f64::INFINITY,
                    None => t.value(*t.p.last().unwrap()),
                }
            }
        })
    }
}

/// `kappa(k) = kappa0 exp(-1 / (1 - (|k|/lambda)^2))` on `|k| < lambda`, cut off
/// in the infrared by `chi(|k|/sigma)`, `chi` rising from 0 at 1 to 1 at 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormFactor {
    pub kappa0: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl FormFactor {
    pub fn new(kappa0: f64, lambda: f64, sigma: f64) -> Result<Self> {
        if !(kappa0 >= 0.0 && lambda > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "form factor kappa0 = {kappa0}, lambda = {lambda}, sigma = {sigma}"
            )));
        }
        Ok(FormFactor { kappa0, lambda, sigma })
    }

    pub fn kappa(&self, k: f64) -> f64 {
        let s = k / self.lambda;
        if s >= 1.0 {
            0.0
        } else {
            self.kappa0 * (-1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn chi(&self, s: f64) -> f64 {
        rise(s, 1.0, 2.0)
    }

    pub fn kappa_sigma(&self, k: f64) -> f64 {
        self.kappa(k) * self.chi(k / self.sigma)
    }

    /// Samples of `kappa_sigma` on a grid.
    pub fn samples(&self, grid: &ModeGrid) -> Vec<C64> {
        (0..grid.n_modes())
            .map(|j| C64::new(self.kappa_sigma(grid.abs_k(j)), 0.0))
            .collect()
    }

    /// Samples of the bare `kappa` (no infrared cutoff).
    pub fn bare_samples(&self, grid: &ModeGrid) -> Vec<C64> {
        (0..grid.n_modes())
            .map(|j| C64::new(self.kappa(grid.abs_k(j)), 0.0))
            .collect()
    }

    /// `C = sum_j w_j kappa(k_j)^2 / |k_j|`, independent of `sigma`.
    pub fn c_const(&self, grid: &ModeGrid) -> f64 {
        (0..grid.n_modes())
            .map(|j| {
                let k = grid.abs_k(j);
                grid.weights()[j] * self.kappa(k).powi(2) / k
            })
            .sum()
    }
}

/// `g_beta = min(1, (1-beta)^{3/2} / (3 sqrt(B C)), (1-beta)^2 / (3 B (C + O_beta)))`.
pub fn g_beta_closed_form(b: f64, c: f64, beta: f64, o_beta: f64) -> f64 {
    let one_minus = 1.0 - beta;
    let second = one_minus.powf(1.5) / (3.0 * (b * c).sqrt());
    let third = one_minus * one_minus / (3.0 * b * (c + o_beta));
    1.0f64.min(second).min(third)
}

/// Coupling threshold for a dispersion, form factor and grid.
pub fn g_beta(disp: &DispersionLaw, ff: &FormFactor, beta: f64, grid: &ModeGrid) -> Result<f64> {
    if !(beta < 1.0) {
        return Err(Error::InvalidConfig(format!("g_beta needs beta < 1, got {beta}")));
    }
    let o = disp.o_beta(beta)?;
    Ok(g_beta_closed_form(disp.hessian_bound(), ff.c_const(grid), beta, o))
}

/// Everything needed to assemble a Hamiltonian.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub disp: DispersionLaw,
    pub ff: FormFactor,
    pub grid: Arc<ModeGrid>,
    pub g: f64,
    /// Use the modified boson dispersion `omega` instead of `|k|`.
    pub use_modified: bool,
}

impl ModelSpec {
    pub fn new(
        disp: DispersionLaw,
        ff: FormFactor,
        grid: Arc<ModeGrid>,
        g: f64,
        use_modified: bool,
    ) -> Result<Self> {
        disp.validate()?;
        if (grid.sigma() - ff.sigma).abs() > 1e-12 * ff.sigma {
            return Err(Error::InvalidConfig(format!(
                "grid sigma {} differs from form-factor sigma {}",
                grid.sigma(),
                ff.sigma
            )));
        }
        if !g.is_finite() {
            return Err(Error::InvalidConfig(format!("coupling g = {g}")));
        }
        Ok(ModelSpec {
            disp,
            ff,
            grid,
            g,
            use_modified,
        })
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        ModelSpec { g, ..self.clone() }
    }

    pub fn with_modified(&self, use_modified: bool) -> Self {
        ModelSpec {
            use_modified,
            ..self.clone()
        }
    }

    pub fn omega(&self) -> &[f64] {
        self.grid.omega(self.use_modified)
    }

    /// `C` of the form factor on this grid.
    pub fn c_const(&self) -> f64 {
        self.ff.c_const(&self.grid)
    }

    /// Electron momentum `P - K`, folded into the Brillouin zone on lattices.
    pub fn electron_momentum(&self, p: &[f64; 3], k: &[f64; 3]) -> [f64; 3] {
        let mut q = [p[0] - k[0], p[1] - k[1], p[2] - k[2]];
        if let GridLayout::Lattice { spacing, .. } = self.grid.layout() {
            q[0] = wrap_bz(q[0], *spacing);
        }
        q
    }

    /// Diagonal of the free fiber Hamiltonian `Omega(P - dGamma(k)) + dGamma(omega)`.
    pub fn free_diagonal(&self, p: &[f64; 3], basis: &OccupationBasis) -> Vec<f64> {
        let omega = self.omega();
        (0..basis.dim())
            .map(|i| {
                let q = self.electron_momentum(p, &basis.momentum(i));
                let bosons: f64 = basis
                    .occupation(i)
                    .iter()
                    .zip(omega)
                    .filter(|(n, _)| **n > 0)
                    .map(|(&n, &w)| n as f64 * w)
                    .sum();
                self.disp.eval(&q) + bosons
            })
            .collect()
    }

    /// `|grad Omega(P - dGamma(k))|` per basis state.
    pub fn grad_diagonal(&self, p: &[f64; 3], basis: &OccupationBasis) -> Vec<[f64; 3]> {
        (0..basis.dim())
            .map(|i| self.disp.grad(&self.electron_momentum(p, &basis.momentum(i))))
            .collect()
    }
}

/// Folds a lattice momentum into `(-pi/a, pi/a]`.
pub fn wrap_bz(q: f64, spacing: f64) -> f64 {
    let period = 2.0 * PI / spacing;
    let half = 0.5 * period;
    let mut r = (q + half).rem_euclid(period) - half;
    if r <= -half {
        r += period;
    }
    r
}

/// Off-diagonal triplets of `g phi(kappa_sigma)` in the fiber basis.
fn interaction_triplets(ms: &ModelSpec, basis: &OccupationBasis) -> Vec<(usize, usize, C64)> {
    let kappa = ms.ff.samples(basis.grid());
    let coords: Vec<f64> = kappa
        .iter()
        .zip(basis.grid().weights())
        .map(|(k, w)| k.re * w.sqrt())
        .collect();
    let mut t = Vec::new();
    let m = basis.n_modes();
    let mut scratch = vec![0u8; m];
    for col in 0..basis.dim() {
        if basis.total(col) >= basis.n_max() {
            continue;
        }
        scratch.copy_from_slice(basis.occupation(col));
        for j in 0..m {
            if coords[j] == 0.0 {
                continue;
            }
            let nj = scratch[j];
            scratch[j] = nj + 1;
            if let Some(row) = basis.index_of(&scratch) {
                let v = C64::new(ms.g * coords[j] * ((nj as f64 + 1.0) * 0.5).sqrt(), 0.0);
                t.push((row, col, v));
                t.push((col, row, v));
            }
            scratch[j] = nj;
        }
    }
    t
}

/// Fiber Hamiltonian `Omega(P - dGamma(k)) + dGamma(omega) + g phi(kappa_sigma)`.
pub fn build_fiber_h(ms: &ModelSpec, p: &[f64; 3], basis: &OccupationBasis) -> Result<SparseOperator> {
    if basis.grid() != ms.grid.as_ref() {
        return Err(Error::IncompatibleGrid("basis grid differs from the model grid".into()));
    }
    let mut t: Vec<(usize, usize, C64)> = ms
        .free_diagonal(p, basis)
        .into_iter()
        .enumerate()
        .map(|(i, d)| (i, i, C64::new(d, 0.0)))
        .collect();
    if ms.g != 0.0 {
        t.extend(interaction_triplets(ms, basis));
    }
    Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), t, true))
}

/// One-dimensional electron on a periodic chain coupled to the boson field,
/// in the basis `|q> (x) |n>` ordered electron-major.
#[derive(Debug, Clone)]
pub struct FullModel {
    pub sites: usize,
    pub spacing: f64,
    /// Electron momentum orders `m` (momentum `2 pi m / (sites spacing)`), ascending.
    pub electron_orders: Vec<i64>,
    pub basis: Arc<OccupationBasis>,
    pub h: SparseOperator,
}

impl FullModel {
    pub fn dim(&self) -> usize {
        self.electron_orders.len() * self.basis.dim()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.sites as f64 * self.spacing)
    }

    pub fn index(&self, q: usize, f: usize) -> usize {
        q * self.basis.dim() + f
    }

    /// `(electron index, Fock index)` of a full-basis index.
    pub fn split_index(&self, i: usize) -> (usize, usize) {
        (i / self.basis.dim(), i % self.basis.dim())
    }

    fn order_to_index(&self, m: i64) -> usize {
        let lo = self.electron_orders[0];
        (m - lo).rem_euclid(self.sites as i64) as usize
    }

    fn boson_orders(&self) -> &[i64] {
        match self.basis.grid().layout() {
            GridLayout::Lattice { orders, .. } => orders,
            _ => unreachable!("checked at construction"),
        }
    }

    /// Total momentum order (mod `sites`, centered) of every basis state.
    pub fn total_orders(&self) -> Vec<i64> {
        let orders = self.boson_orders();
        let nf = self.basis.dim();
        let mut out = Vec::with_capacity(self.dim());
        for &qe in &self.electron_orders {
            for f in 0..nf {
                let kb: i64 = self
                    .basis
                    .occupation(f)
                    .iter()
                    .zip(orders)
                    .map(|(&n, &m)| n as i64 * m)
                    .sum();
                out.push(self.center_order(qe + kb));
            }
        }
        out
    }

    fn center_order(&self, m: i64) -> i64 {
        let lo = self.electron_orders[0];
        lo + (m - lo).rem_euclid(self.sites as i64)
    }

    /// Total momentum `p + dGamma(k)` (folded into the zone) as a diagonal operator.
    pub fn total_momentum_op(&self) -> SparseOperator {
        let dk = self.dk();
        let d: Vec<f64> = self.total_orders().iter().map(|&m| m as f64 * dk).collect();
        SparseOperator::diagonal(&d)
    }

    /// Indices of the block with total momentum order `m`.
    pub fn block_indices(&self, m: i64) -> Vec<usize> {
        let target = self.center_order(m);
        self.total_orders()
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == target)
            .map(|(i, _)| i)
            .collect()
    }

    /// Electron momentum of electron index `q`.
    pub fn electron_momentum(&self, q: usize) -> f64 {
        self.electron_orders[q] as f64 * self.dk()
    }
}

/// Assembles the full Hamiltonian `Omega(p) + dGamma(omega) + g phi(G_x)` on a
/// chain of `sites` sites. The boson grid must be a sub-lattice of the dual
/// lattice of the same chain.
pub fn build_full_h(ms: &ModelSpec, sites: usize, basis: Arc<OccupationBasis>) -> Result<FullModel> {
    let (spacing, orders) = match ms.grid.layout() {
        GridLayout::Lattice {
            sites: s,
            spacing,
            orders,
        } if *s == sites => (*spacing, orders.clone()),
        GridLayout::Lattice { sites: s, .. } => {
            return Err(Error::IncompatibleGrid(format!(
                "boson modes live on the dual lattice of {s} sites, electron chain has {sites}"
            )))
        }
        _ => {
            return Err(Error::IncompatibleGrid(
                "full model needs boson modes on the electron's dual lattice".into(),
            ))
        }
    };
    if basis.grid() != ms.grid.as_ref() {
        return Err(Error::IncompatibleGrid("basis grid differs from the model grid".into()));
    }
    let lo = -((sites as i64 - 1) / 2);
    let electron_orders: Vec<i64> = (lo..lo + sites as i64).collect();
    let mut model = FullModel {
        sites,
        spacing,
        electron_orders,
        basis: basis.clone(),
        h: SparseOperator::zeros(0, 0),
    };
    let nf = basis.dim();
    let dim = model.dim();
    let dk = model.dk();
    let omega = ms.omega();
    let boson_energy: Vec<f64> = (0..nf)
        .map(|f| {
            basis
                .occupation(f)
                .iter()
                .zip(omega)
                .map(|(&n, &w)| n as f64 * w)
                .sum()
        })
        .collect();
    let mut t = Vec::new();
    for (qi, &qe) in model.electron_orders.iter().enumerate() {
        let e = ms.disp.radial((qe as f64 * dk).abs());
        for (f, be) in boson_energy.iter().enumerate() {
            t.push((qi * nf + f, qi * nf + f, C64::new(e + be, 0.0)));
        }
    }
    if ms.g != 0.0 {
        // Creating mode j multiplies by exp(-i k_j x): electron order q -> q - m_j.
        let fiber = interaction_triplets(ms, &basis);
        for (row, col, v) in fiber {
            if basis.total(row) <= basis.total(col) {
                continue;
            }
            // (row, col) raises one boson; find which mode.
            let j = basis
                .occupation(row)
                .iter()
                .zip(basis.occupation(col))
                .position(|(a, b)| a != b)
                .expect("raising transition changes one mode");
            for qi in 0..model.electron_orders.len() {
                let qe = model.electron_orders[qi];
                let target = model.order_to_index(qe - orders[j]);
                let (r, c) = (target * nf + row, qi * nf + col);
                t.push((r, c, v));
                t.push((c, r, v.conj()));
            }
        }
    }
    model.h = SparseOperator::from_triplets(dim, dim, t, true);
    Ok(model)
}

/// Position-space tail of the coupling function on a periodic chain.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `(R, || chi(|x| >= R) G_hat ||)`.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `-log tail` against `log R` (rows with `R > 0`).
    pub fitted_exponent: f64,
    pub mu: f64,
    pub meets_mu: bool,
}

/// Tabulates the tail mass of the discrete Fourier transform of
/// `kappa_sigma` over the dual lattice of a chain of `sites` sites.
pub fn interaction_decay_report(
    ff: &FormFactor,
    sites: usize,
    spacing: f64,
    r_values: &[f64],
    mu: f64,
) -> Result<DecayReport> {
    let grid = ModeGrid::lattice(sites, spacing, f64::INFINITY, ff.sigma)?;
    let coeffs: Vec<(f64, f64)> = (0..grid.n_modes())
        .map(|j| (grid.point(j)[0], ff.kappa_sigma(grid.abs_k(j)) * grid.weights()[j].sqrt()))
        .collect();
    let lo = -((sites as i64 - 1) / 2);
    let norm = 1.0 / (sites as f64).sqrt();
    let field: Vec<(f64, f64)> = (lo..lo + sites as i64)
        .map(|n| {
            let x = n as f64 * spacing;
            let v: C64 = coeffs.iter().map(|&(k, c)| C64::from_polar(c, k * x)).sum();
            (x.abs(), (v * norm).norm_sqr())
        })
        .collect();
    let rows: Vec<(f64, f64)> = r_values
        .iter()
        .map(|&r| {
            let tail: f64 = field.iter().filter(|(x, _)| *x >= r).map(|(_, v)| v).sum();
            (r, tail.sqrt())
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(r, t)| *r > 0.0 && *t > 0.0)
        .map(|(r, t)| (r.ln(), -t.ln()))
        .collect();
    let fitted_exponent = crate::stats::slope(&pts);
    Ok(DecayReport {
        rows,
        fitted_exponent,
        mu,
        meets_mu: fitted_exponent >= mu,
    })
}
