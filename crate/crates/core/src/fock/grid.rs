use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::cutoff::{smooth_step, smooth_step_deriv};
use crate::error::{check_len, Error, Result};
use crate::sparse::C64;

/// How the nodes of a [`ModeGrid`] were laid out. Finite-difference
/// machinery (the boson position operator) needs this.
#[derive(Clone, Debug, PartialEq)]
pub enum GridLayout {
    /// Uniform midpoint nodes on `[-kmax, kmax]`; an even node count keeps 0 off the grid.
    Line { spacing: f64 },
    /// Dual lattice of a periodic chain: `k = 2 pi m / (sites * spacing)`, `m != 0`.
    Lattice {
        sites: usize,
        spacing: f64,
        orders: Vec<i64>,
    },
    /// Radial midpoint shells times a fixed direction set (3D).
    Radial { n_radial: usize, n_dirs: usize },
    /// Disjoint union; the first `split` modes come from the left grid.
    Union { split: usize },
    Custom,
}

/// Discretized one-boson momentum space.
///
/// Mode operators (`M x M` matrices passed to `dGamma`, `Gamma`, ...) are
/// always written in the orthonormal mode basis `e_j / sqrt(w_j)`; sampled
/// functions `h_j` enter smeared operators with a `sqrt(w_j)` factor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    dim: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    omega_free: Vec<f64>,
    omega_mod: Vec<f64>,
    sigma: f64,
    layout: GridLayout,
}

/// Modified boson dispersion: `sqrt(k^2 + sigma^2/4)` below `sigma/2`,
/// `|k|` above `sigma`, smoothly blended in between.
pub fn modified_dispersion(k: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return k;
    }
    let soft = (k * k + 0.25 * sigma * sigma).sqrt();
    let b = smooth_step((k - 0.5 * sigma) / (0.5 * sigma));
    (1.0 - b) * soft + b * k
}

/// Radial derivative `d omega / d|k|` of [`modified_dispersion`].
pub fn modified_dispersion_deriv(k: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 1.0;
    }
    let soft = (k * k + 0.25 * sigma * sigma).sqrt();
    let dsoft = k / soft;
    let x = (k - 0.5 * sigma) / (0.5 * sigma);
    let b = smooth_step(x);
    let db = smooth_step_deriv(x) / (0.5 * sigma);
    (1.0 - b) * dsoft + b + db * (k - soft)
}

fn norm3(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

impl ModeGrid {
    /// Builds a grid from explicit nodes and validates it.
    pub fn from_parts(
        dim: usize,
        points: Vec<[f64; 3]>,
        weights: Vec<f64>,
        sigma: f64,
        layout: GridLayout,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidConfig(format!("grid dimension {dim} not in 1..=3")));
        }
        check_len(points.len(), weights.len())?;
        if points.is_empty() {
            return Err(Error::InvalidConfig("grid has no modes".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("infrared cutoff sigma = {sigma}")));
        }
        let omega_free: Vec<f64> = points.iter().map(norm3).collect();
        let omega_mod = omega_free.iter().map(|&k| modified_dispersion(k, sigma)).collect();
        let grid = ModeGrid {
            dim,
            points,
            weights,
            omega_free,
            omega_mod,
            sigma,
            layout,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform midpoint grid on `[-kmax, kmax]` in one dimension.
    pub fn line(n_modes: usize, kmax: f64, sigma: f64) -> Result<Self> {
        if n_modes == 0 || n_modes % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "line grid needs an even, positive mode count (got {n_modes}) so that k = 0 is not a node"
            )));
        }
        if kmax <= 0.0 {
            return Err(Error::InvalidConfig(format!("kmax = {kmax}")));
        }
        let h = 2.0 * kmax / n_modes as f64;
        let points = (0..n_modes)
            .map(|j| [-kmax + (j as f64 + 0.5) * h, 0.0, 0.0])
            .collect();
        Self::from_parts(1, points, vec![h; n_modes], sigma, GridLayout::Line { spacing: h })
    }

    /// Dual lattice of a periodic chain with `sites` sites and lattice
    /// constant `spacing`, truncated to `|k| <= kmax`, without `k = 0`.
    pub fn lattice(sites: usize, spacing: f64, kmax: f64, sigma: f64) -> Result<Self> {
        if sites < 2 || spacing <= 0.0 {
            return Err(Error::InvalidConfig(format!("lattice sites = {sites}, spacing = {spacing}")));
        }
        let dk = 2.0 * PI / (sites as f64 * spacing);
        let half = (sites / 2) as i64;
        let lo = -((sites as i64 - 1) / 2);
        let orders: Vec<i64> = (lo..=half)
            .filter(|&m| m != 0 && (m as f64 * dk).abs() <= kmax + 1e-12)
            .collect();
        if orders.is_empty() {
            return Err(Error::InvalidConfig(format!("kmax = {kmax} admits no lattice momenta")));
        }
        let points = orders.iter().map(|&m| [m as f64 * dk, 0.0, 0.0]).collect();
        let weights = vec![dk; orders.len()];
        Self::from_parts(
            1,
            points,
            weights,
            sigma,
            GridLayout::Lattice {
                sites,
                spacing,
                orders,
            },
        )
    }

    /// Radial midpoint shells on `(0, kmax]` times a direction set
    /// (`n_dirs` = 6: coordinate axes; 14: axes and cube diagonals).
    pub fn radial(n_radial: usize, kmax: f64, n_dirs: usize, sigma: f64) -> Result<Self> {
        let dirs: Vec<[f64; 3]> = match n_dirs {
            6 => vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            14 => {
                let mut d = vec![
                    [1.0, 0.0, 0.0],
                    [-1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, -1.0, 0.0],
                    [0.0, 0.0, 1.0],
                    [0.0, 0.0, -1.0],
                ];
                let s = 1.0 / 3f64.sqrt();
                for &a in &[-s, s] {
                    for &b in &[-s, s] {
                        for &c in &[-s, s] {
                            d.push([a, b, c]);
                        }
                    }
                }
                d
            }
            _ => {
                return Err(Error::InvalidConfig(format!("direction count {n_dirs} not in {{6, 14}}")))
            }
        };
        if n_radial == 0 || kmax <= 0.0 {
            return Err(Error::InvalidConfig("radial grid needs n_radial > 0 and kmax > 0".into()));
        }
        let dr = kmax / n_radial as f64;
        let mut points = Vec::with_capacity(n_radial * dirs.len());
        let mut weights = Vec::with_capacity(n_radial * dirs.len());
        for i in 0..n_radial {
            let r = (i as f64 + 0.5) * dr;
            for d in &dirs {
                points.push([r * d[0], r * d[1], r * d[2]]);
                weights.push(4.0 * PI * r * r * dr / dirs.len() as f64);
            }
        }
        Self::from_parts(3, points, weights, sigma, GridLayout::Radial { n_radial, n_dirs })
    }

    /// One-particle space `h1 (+) h2` as a grid: left modes first.
    pub fn disjoint_union(left: &ModeGrid, right: &ModeGrid) -> Result<Self> {
        if left.dim != right.dim {
            return Err(Error::IncompatibleGrid("union of grids of different dimension".into()));
        }
        let mut points = left.points.clone();
        points.extend_from_slice(&right.points);
        let mut weights = left.weights.clone();
        weights.extend_from_slice(&right.weights);
        let mut g = ModeGrid {
            dim: left.dim,
            points,
            weights,
            omega_free: [left.omega_free.clone(), right.omega_free.clone()].concat(),
            omega_mod: [left.omega_mod.clone(), right.omega_mod.clone()].concat(),
            sigma: left.sigma,
            layout: GridLayout::Union { split: left.n_modes() },
        };
        g.sigma = left.sigma.min(right.sigma);
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if let Some(j) = self.weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig(format!("weight of mode {j} is {}", self.weights[j])));
        }
        let check_distinct = |range: std::ops::Range<usize>| -> Result<()> {
            let mut keys: Vec<(u64, u64, u64, usize)> = range
                .map(|j| {
                    let p = self.points[j];
                    (p[0].to_bits(), p[1].to_bits(), p[2].to_bits(), j)
                })
                .collect();
            keys.sort();
            for w in keys.windows(2) {
                if (w[0].0, w[0].1, w[0].2) == (w[1].0, w[1].1, w[1].2) {
                    return Err(Error::InvalidConfig(format!(
                        "modes {} and {} share a momentum",
                        w[0].3, w[1].3
                    )));
                }
            }
            Ok(())
        };
        match self.layout {
            GridLayout::Union { split } => {
                check_distinct(0..split)?;
                check_distinct(split..self.n_modes())?;
            }
            _ => check_distinct(0..self.n_modes())?,
        }
        for j in 0..self.n_modes() {
            let (f, m) = (self.omega_free[j], self.omega_mod[j]);
            let ok = m >= f - 1e-15 && m >= 0.5 * self.sigma - 1e-15 && (f <= self.sigma || m == f);
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "modified dispersion violates its constraints at mode {j}: |k| = {f}, omega = {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn point(&self, j: usize) -> [f64; 3] {
        self.points[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn omega_free(&self) -> &[f64] {
        &self.omega_free
    }

    pub fn omega_mod(&self) -> &[f64] {
        &self.omega_mod
    }

    pub fn omega(&self, use_modified: bool) -> &[f64] {
        if use_modified {
            &self.omega_mod
        } else {
            &self.omega_free
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// `|k_j|`.
    pub fn abs_k(&self, j: usize) -> f64 {
        self.omega_free[j]
    }

    /// Whether mode `j` is soft (`|k_j| <= sigma`).
    pub fn is_soft(&self, j: usize) -> bool {
        self.omega_free[j] <= self.sigma
    }

    pub fn soft_mask(&self) -> Vec<bool> {
        (0..self.n_modes()).map(|j| self.is_soft(j)).collect()
    }

    /// `grad omega(k_j)` for the modified or the free dispersion.
    pub fn grad_omega(&self, j: usize, use_modified: bool) -> [f64; 3] {
        let p = self.points[j];
        let k = self.omega_free[j];
        let d = if use_modified {
            modified_dispersion_deriv(k, self.sigma)
        } else {
            1.0
        };
        [d * p[0] / k, d * p[1] / k, d * p[2] / k]
    }

    /// Orthonormal-basis coordinates `sqrt(w_j) h_j` of a sampled function.
    pub fn coords(&self, h: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n_modes(), h.len())?;
        Ok(h.iter().zip(&self.weights).map(|(x, w)| x * w.sqrt()).collect())
    }

    /// Inverse of [`ModeGrid::coords`].
    pub fn samples(&self, c: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n_modes(), c.len())?;
        Ok(c.iter().zip(&self.weights).map(|(x, w)| x / w.sqrt()).collect())
    }

    /// `<g, h> = sum_j w_j conj(g_j) h_j`.
    pub fn inner(&self, g: &[C64], h: &[C64]) -> C64 {
        g.iter()
            .zip(h)
            .zip(&self.weights)
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum()
    }

    pub fn norm(&self, h: &[C64]) -> f64 {
        self.inner(h, h).re.sqrt()
    }

    /// Applies a mode operator (orthonormal basis) to a sampled function.
    pub fn apply(&self, b: &DMatrix<C64>, h: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n_modes(), b.ncols())?;
        let c = nalgebra::DVector::from_vec(self.coords(h)?);
        let out = b * c;
        check_len(self.n_modes(), out.len())?;
        self.samples(out.as_slice())
    }

    /// Subadditivity `omega(k1 + k2) <= omega(k1) + omega(k2)` over all node
    /// pairs. Returns the worst violation (positive means violated).
    pub fn subadditivity_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for a in 0..self.n_modes() {
            for b in 0..self.n_modes() {
                let p = self.points[a];
                let q = self.points[b];
                let s = norm3(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]);
                let lhs = modified_dispersion(s, self.sigma);
                worst = worst.max(lhs - self.omega_mod[a] - self.omega_mod[b]);
            }
        }
        worst
    }
}

/// Dense diagonal mode operator.
pub fn diag_op(d: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(d.len(), d.len(), |i, j| {
        if i == j {
            C64::new(d[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `||h||_omega = (sum_j w_j (1 + 1/|k_j|) |h_j|^2)^{1/2}`.
pub fn weighted_norm_omega(grid: &ModeGrid, h: &[C64]) -> Result<f64> {
    check_len(grid.n_modes(), h.len())?;
    let mut acc = 0.0;
    for j in 0..grid.n_modes() {
        let k = grid.abs_k(j);
        if k == 0.0 {
            return Err(Error::SingularMode(j));
        }
        acc += grid.weights()[j] * (1.0 + 1.0 / k) * h[j].norm_sqr();
    }
    Ok(acc.sqrt())
}

/// `sum_j w_j |h_j|^2 / |k_j|`.
pub fn infrared_norm_sq(grid: &ModeGrid, h: &[C64]) -> Result<f64> {
    check_len(grid.n_modes(), h.len())?;
    let mut acc = 0.0;
    for j in 0..grid.n_modes() {
        let k = grid.abs_k(j);
        if k == 0.0 {
            return Err(Error::SingularMode(j));
        }
        acc += grid.weights()[j] * h[j].norm_sqr() / k;
    }
    Ok(acc)
}
