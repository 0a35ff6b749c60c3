//! Time evolution `exp(-iHt)` by Krylov steps and numerical probes of the
//! late-time behaviour: propagation estimates, asymptotic fields, and the
//! boson counter `W` with its split version.

use nalgebra::DMatrix;

use crate::cutoff::{fall, rise, Switch};
use crate::error::{check_len, Error, Result};
use crate::fock::basis::OccupationBasis;
use crate::fock::ops::{annihilation_op, creation_op, dgamma};
use crate::linalg;
use crate::model::FullModel;
use crate::mourre::build_position_op;
use crate::sparse::{SparseOperator, C64};
use crate::split::{breve_gamma, SplitPair, TensorBasis};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Lanczos vectors per step.
    pub krylov_dim: usize,
    /// Accepted a posteriori error per step.
    pub step_tol: f64,
    pub max_step: f64,
    /// Below this step size a failing step is a hard error.
    pub min_step: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            krylov_dim: 30,
            step_tol: 1e-12,
            max_step: 5.0,
            min_step: 1e-9,
        }
    }
}

/// One Lanczos step `exp(-i H dt) v` with the error estimate
/// `||v|| beta_m |e_m^T exp(-i T dt) e_1|`.
pub fn krylov_step(h: &SparseOperator, v: &[C64], dt: f64, m: usize) -> Result<(Vec<C64>, f64)> {
    check_len(h.cols(), v.len())?;
    let n = v.len();
    let beta0 = linalg::norm(v);
    if beta0 == 0.0 {
        return Ok((vec![ZERO; n], 0.0));
    }
    let m = m.max(1).min(n);
    let scale = h.max_abs().max(1.0);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut first = v.to_vec();
    linalg::scale(C64::new(1.0 / beta0, 0.0), &mut first);
    q.push(first);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut tail = 0.0;
    loop {
        let j = q.len() - 1;
        let mut w = h.matvec(&q[j]);
        alpha.push(linalg::dot(&q[j], &w).re);
        for _ in 0..2 {
            for qi in &q {
                let c = linalg::dot(qi, &w);
                linalg::axpy(-c, qi, &mut w);
            }
        }
        let b = linalg::norm(&w);
        if !b.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::KrylovBreakdown {
                t: dt,
                reason: "non-finite Lanczos coefficient".into(),
            });
        }
        if b <= 1e-13 * scale {
            // Invariant subspace: the step is exact.
            break;
        }
        if q.len() == m {
            tail = b;
            break;
        }
        beta.push(b);
        linalg::scale(C64::new(1.0 / b, 0.0), &mut w);
        q.push(w);
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (vals, vecs) = linalg::eigh_real(&t);
    let y: Vec<C64> = (0..k)
        .map(|i| {
            (0..k)
                .map(|c| C64::from_polar(1.0, -vals[c] * dt) * (vecs[(i, c)] * vecs[(0, c)]))
                .sum()
        })
        .collect();
    let err = beta0 * tail * y[k - 1].norm();
    let mut out = vec![ZERO; n];
    for (yi, qi) in y.iter().zip(&q) {
        linalg::axpy(yi * beta0, qi, &mut out);
    }
    Ok((out, err))
}

/// `exp(-i H t) v` in adaptive Krylov steps; also returns the step count.
/// Negative `t` evolves backwards.
pub fn evolve(h: &SparseOperator, v: &[C64], t: f64, opts: &KrylovOptions) -> Result<(Vec<C64>, usize)> {
    if !h.is_hermitian() {
        return Err(Error::Precondition("time evolution needs a Hermitian-flagged operator".into()));
    }
    let sign = t.signum();
    let total = t.abs();
    let mut done = 0.0;
    let mut dt = opts.max_step.min(total);
    let mut state = v.to_vec();
    let mut steps = 0;
    while done < total {
        let step = dt.min(total - done);
        let (next, err) = krylov_step(h, &state, sign * step, opts.krylov_dim)?;
        if err <= opts.step_tol {
            state = next;
            done += step;
            steps += 1;
            if err < 0.1 * opts.step_tol {
                dt = (dt * 1.5).min(opts.max_step);
            }
        } else {
            dt = 0.5 * step;
            if dt < opts.min_step {
                return Err(Error::KrylovBreakdown {
                    t: sign * done,
                    reason: format!("step error {err:.2e} above {:.1e} at the minimal step", opts.step_tol),
                });
            }
        }
    }
    Ok((state, steps))
}

/// `f(H) v` from a Lanczos basis of dimension `m` (full reorthogonalization).
pub fn krylov_function(h: &SparseOperator, v: &[C64], m: usize, f: impl Fn(f64) -> f64) -> Result<Vec<C64>> {
    check_len(h.cols(), v.len())?;
    let n = v.len();
    let beta0 = linalg::norm(v);
    if beta0 == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let m = m.max(1).min(n);
    let scale = h.max_abs().max(1.0);
    let mut q: Vec<Vec<C64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut hq: Vec<Vec<C64>> = Vec::new();
    while q.len() <= m {
        let j = q.len() - 1;
        let mut w = h.matvec(&q[j]);
        hq.push(w.clone());
        if q.len() == m {
            break;
        }
        for _ in 0..2 {
            for qi in &q {
                let c = linalg::dot(qi, &w);
                linalg::axpy(-c, qi, &mut w);
            }
        }
        let b = linalg::normalize(&mut w);
        if b <= 1e-13 * scale {
            break;
        }
        q.push(w);
    }
    let k = hq.len();
    q.truncate(k);
    let t = DMatrix::from_fn(k, k, |i, j| linalg::dot(&q[i], &hq[j]));
    let t = (&t + t.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = linalg::eigh(&t);
    let mut out = vec![ZERO; n];
    for c in 0..k {
        let coef = vecs[(0, c)].conj() * f(vals[c]) * beta0;
        for (i, qi) in q.iter().enumerate() {
            linalg::axpy(coef * vecs[(i, c)], qi, &mut out);
        }
    }
    Ok(out)
}

/// A state evolving under a fixed Hamiltonian, with conservation bookkeeping.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub h: SparseOperator,
    pub state: Vec<C64>,
    pub time: f64,
    pub opts: KrylovOptions,
    norm0: f64,
    energy0: f64,
    pub steps: usize,
}

impl Propagation {
    pub fn new(h: SparseOperator, state: Vec<C64>, opts: KrylovOptions) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::Precondition("time evolution needs a Hermitian-flagged operator".into()));
        }
        check_len(h.cols(), state.len())?;
        let norm0 = linalg::norm(&state);
        let energy0 = h.expectation(&state).re;
        Ok(Propagation {
            h,
            state,
            time: 0.0,
            opts,
            norm0,
            energy0,
            steps: 0,
        })
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time {
            return Err(Error::Precondition(format!("cannot advance from t = {} back to {t}", self.time)));
        }
        if t > self.time {
            let (s, n) = evolve(&self.h, &self.state, t - self.time, &self.opts)?;
            self.state = s;
            self.steps += n;
            self.time = t;
        }
        Ok(())
    }

    /// `| ||psi_t|| - ||psi_0|| |`
    pub fn norm_drift(&self) -> f64 {
        (linalg::norm(&self.state) - self.norm0).abs()
    }

    /// `| <H>_t - <H>_0 |`
    pub fn energy_drift(&self) -> f64 {
        (self.h.expectation(&self.state).re - self.energy0).abs()
    }
}

/// `t0, t0 r, t0 r^2, ...` up to and including `t_end`.
pub fn geometric_times(t0: f64, ratio: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && ratio > 1.0 && t_end >= t0) {
        return Err(Error::InvalidConfig(format!(
            "geometric time grid t0 = {t0}, ratio = {ratio}, t_end = {t_end}"
        )));
    }
    let mut out = vec![t0];
    loop {
        let next = out.last().unwrap() * ratio;
        if next >= t_end * (1.0 - 1e-12) {
            break;
        }
        out.push(next);
    }
    if *out.last().unwrap() < t_end {
        out.push(t_end);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub value: f64,
    /// Trapezoidal `int value dt / t` from the first sample.
    pub running: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
}

/// Time series of one observable along a propagation.
#[derive(Debug, Clone)]
pub struct ObservableTrack {
    pub name: String,
    pub points: Vec<TrackPoint>,
}

impl ObservableTrack {
    pub fn new(name: &str) -> Self {
        ObservableTrack {
            name: name.to_string(),
            points: Vec::new(),
        }
    }

    /// Appends a sample and updates the running integral.
    pub fn push(&mut self, t: f64, value: f64, norm_drift: f64, energy_drift: f64) {
        let running = match self.points.last() {
            Some(p) => p.running + 0.5 * (t - p.t) * (value / t + p.value / p.t),
            None => 0.0,
        };
        self.points.push(TrackPoint {
            t,
            value,
            running,
            norm_drift,
            energy_drift,
        });
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.value)
    }

    pub fn final_running(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.running)
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.value.is_finite() && p.running.is_finite())
    }

    /// Whether the last `n` values are non-increasing (up to `slack`).
    pub fn decreasing_tail(&self, n: usize, slack: f64) -> bool {
        let v = self.values();
        let start = v.len().saturating_sub(n);
        v[start..].windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Worst drift rates `drift / t` over the track.
    pub fn drift_rates(&self) -> (f64, f64) {
        self.points.iter().fold((0.0, 0.0), |(a, b), p| {
            (a.max(p.norm_drift / p.t.max(1.0)), b.max(p.energy_drift / p.t.max(1.0)))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,running_integral,norm_drift,energy_drift\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                p.t, p.value, p.running, p.norm_drift, p.energy_drift
            ));
        }
        s
    }
}

/// Evaluates `obs(t, psi_t)` along `times` (ascending, positive).
pub fn track(
    prop: &mut Propagation,
    times: &[f64],
    name: &str,
    mut obs: impl FnMut(f64, &[C64]) -> Result<f64>,
) -> Result<ObservableTrack> {
    let mut out = ObservableTrack::new(name);
    for &t in times {
        prop.advance_to(t)?;
        let v = obs(t, &prop.state)?;
        out.push(t, v, prop.norm_drift(), prop.energy_drift());
    }
    Ok(out)
}

/// Support thresholds `beta < beta0 < beta1 < beta2 < beta3 < gamma` of the
/// cutoff family and the shapes built on them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub beta: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub gamma: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            beta: 0.2,
            beta0: 0.22,
            beta1: 0.25,
            beta2: 0.3,
            beta3: 0.35,
            gamma: 0.4,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let v = [self.beta, self.beta0, self.beta1, self.beta2, self.beta3, self.gamma];
        if !(v[0] > 0.0 && v.windows(2).all(|w| w[0] < w[1])) {
            return Err(Error::InvalidConfig(format!("thresholds must increase strictly: {v:?}")));
        }
        Ok(())
    }

    /// Positivity runs need `beta < 1/3` and `gamma in (beta, 1 - 2 beta)`.
    pub fn validate_positivity(&self) -> Result<()> {
        self.validate()?;
        if !(self.beta < 1.0 / 3.0 && self.gamma < 1.0 - 2.0 * self.beta) {
            return Err(Error::InvalidConfig(format!(
                "positivity needs beta < 1/3 and gamma < 1 - 2 beta (beta = {}, gamma = {})",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// Electron cutoff `F`, supported in `(beta0, inf)`.
    pub fn electron_cutoff(&self) -> Switch {
        Switch::new(self.beta0, self.beta1)
    }

    /// `chi_gamma`: 0 below `beta3`, 1 above `gamma`.
    pub fn chi_gamma(&self, s: f64) -> f64 {
        rise(s, self.beta3, self.gamma)
    }

    /// `j_0`: 1 below `beta1`, 0 above `beta2`.
    pub fn j0(&self, s: f64) -> f64 {
        fall(s, self.beta1, self.beta2)
    }

    /// `j_inf = sqrt(1 - j_0^2)`.
    pub fn jinf(&self, s: f64) -> f64 {
        (1.0 - self.j0(s).powi(2)).max(0.0).sqrt()
    }
}

/// Spectral decomposition of the boson position operator, for functions of `|y| / t`.
#[derive(Debug, Clone)]
pub struct PositionSpectrum {
    pub vals: Vec<f64>,
    pub vecs: DMatrix<C64>,
}

impl PositionSpectrum {
    pub fn new(basis: &OccupationBasis) -> Result<Self> {
        let y = build_position_op(basis.grid())?;
        let (vals, vecs) = linalg::eigh(&y);
        Ok(PositionSpectrum { vals, vecs })
    }

    /// Largest `|y|` eigenvalue.
    pub fn radius(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `f(|y| / t)` as a mode operator.
    pub fn function(&self, t: f64, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        linalg::hermitian_function(&self.vals, &self.vecs, |l| C64::new(f(l.abs() / t), 0.0))
    }

    /// `dGamma(f(|y| / t))` on a basis.
    pub fn counter(&self, basis: &OccupationBasis, t: f64, f: impl Fn(f64) -> f64) -> Result<SparseOperator> {
        dgamma(basis, &self.function(t, f))
    }
}

/// Full-model amplitudes in the electron position representation,
/// `psi(x_n, f) = L^{-1/2} sum_q exp(i p_q x_n) psi(q, f)`, site-major.
pub fn electron_position_amplitudes(fm: &FullModel, psi: &[C64]) -> Result<Vec<Vec<C64>>> {
    check_len(fm.dim(), psi.len())?;
    let l = fm.sites;
    let nf = fm.basis.dim();
    let norm = 1.0 / (l as f64).sqrt();
    let orders = &fm.electron_orders;
    let out = orders
        .iter()
        .map(|&n| {
            let mut row = vec![ZERO; nf];
            for (qi, &m) in orders.iter().enumerate() {
                let phase = C64::from_polar(norm, 2.0 * std::f64::consts::PI * (m * n) as f64 / l as f64);
                let block = &psi[qi * nf..(qi + 1) * nf];
                for (r, b) in row.iter_mut().zip(block) {
                    *r += phase * b;
                }
            }
            row
        })
        .collect();
    Ok(out)
}

/// Electron positions `x_n = n a` matching [`electron_position_amplitudes`].
pub fn electron_positions(fm: &FullModel) -> Vec<f64> {
    fm.electron_orders.iter().map(|&n| n as f64 * fm.spacing).collect()
}

/// `<psi, F(|x| / t) psi>` for the electron position `x`.
pub fn electron_cutoff_expectation(fm: &FullModel, psi: &[C64], t: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let amps = electron_position_amplitudes(fm, psi)?;
    Ok(electron_positions(fm)
        .iter()
        .zip(&amps)
        .map(|(x, row)| f(x.abs() / t) * row.iter().map(|a| a.norm_sqr()).sum::<f64>())
        .sum())
}

/// A wave packet of dressed one-electron states in the full model.
#[derive(Debug, Clone)]
pub struct DressedPacket {
    pub state: Vec<C64>,
    /// Total momentum orders with nonzero weight.
    pub orders: Vec<i64>,
    /// Block ground energies per order.
    pub energies: Vec<f64>,
    /// `max_m || |grad Omega(p)| psi_m ||` over the support.
    pub velocity_bound: f64,
}

/// `sum_m c(P_m) psi_m` with `psi_m` the ground state of the total-momentum block `m`.
/// Each `psi_m` is phased so that its bare-electron component is real positive.
pub fn dressed_packet(
    fm: &FullModel,
    disp_grad: impl Fn(f64) -> f64,
    profile: impl Fn(f64) -> C64,
) -> Result<DressedPacket> {
    let dk = fm.dk();
    let nf = fm.basis.dim();
    let mut state = vec![ZERO; fm.dim()];
    let mut orders = Vec::new();
    let mut energies = Vec::new();
    let mut velocity_bound: f64 = 0.0;
    for (qi, &m) in fm.electron_orders.iter().enumerate() {
        let c = profile(m as f64 * dk);
        if c == ZERO {
            continue;
        }
        let idx = fm.block_indices(m);
        let block = fm.h.restrict(&idx, &idx).to_dense();
        let (vals, vecs) = linalg::eigh(&block);
        let mut v: Vec<C64> = vecs.column(0).iter().copied().collect();
        let bare = idx
            .iter()
            .position(|&i| i == qi * nf)
            .ok_or_else(|| Error::Precondition(format!("block {m} lacks its bare electron state")))?;
        crate::eigen::fix_phase(&mut v, bare);
        let mut speed_sq = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            let (q, _) = fm.split_index(i);
            speed_sq += disp_grad(fm.electron_momentum(q)).powi(2) * v[k].norm_sqr();
            state[i] += c * v[k];
        }
        velocity_bound = velocity_bound.max(speed_sq.sqrt());
        orders.push(m);
        energies.push(vals[0]);
    }
    if orders.is_empty() {
        return Err(Error::EmptySubspace("packet profile vanishes on every total momentum".into()));
    }
    linalg::normalize(&mut state);
    Ok(DressedPacket {
        state,
        orders,
        energies,
        velocity_bound,
    })
}

/// Fraction of the Brillouin zone that electron momenta may occupy.
pub const ZONE_MARGIN: f64 = 0.75;

/// Rejects runs whose electron momenta `|P| + kmax` leave the inner
/// `ZONE_MARGIN` part of the zone, where the lattice dispersion would fold.
pub fn check_zone_margin(spacing: f64, packet_pmax: f64, kmax: f64) -> Result<()> {
    let edge = std::f64::consts::PI / spacing;
    if packet_pmax + kmax > ZONE_MARGIN * edge {
        return Err(Error::InvalidConfig(format!(
            "electron momenta reach {} > {ZONE_MARGIN} * pi / a = {}",
            packet_pmax + kmax,
            ZONE_MARGIN * edge
        )));
    }
    Ok(())
}

/// Track of `<F(|x| / t)>` for the electron position.
pub fn electron_velocity_probe(
    prop: &mut Propagation,
    fm: &FullModel,
    cutoff: Switch,
    times: &[f64],
) -> Result<ObservableTrack> {
    track(prop, times, "electron_cutoff", |t, psi| {
        electron_cutoff_expectation(fm, psi, t, |s| cutoff.eval(s))
    })
}

/// Which boson phase-space observable the photon probe integrates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonMonitor {
    /// `dGamma(chi_[lo, hi](|y| / t))`, a smoothed window.
    Window { lo: f64, hi: f64, ramp: f64 },
    /// `dGamma(|J (grad omega - y / t)|)`.
    PhaseSpace { j: f64 },
}

/// Result of a photon velocity run.
#[derive(Debug, Clone)]
pub struct PhotonTrack {
    pub track: ObservableTrack,
    /// Set when the window starts at or below `max(1, beta)`, where no estimate is claimed.
    pub warning: Option<String>,
}

/// Boson mode operator of a monitor at time `t`.
fn monitor_matrix(
    spec: &PositionSpectrum,
    y: &DMatrix<C64>,
    speed: &[f64],
    monitor: PhotonMonitor,
    t: f64,
) -> DMatrix<C64> {
    match monitor {
        PhotonMonitor::Window { lo, hi, ramp } => spec.function(t, |s| crate::cutoff::plateau(s, lo, hi, ramp)),
        PhotonMonitor::PhaseSpace { j } => {
            let m = speed.len();
            let b = DMatrix::from_fn(m, m, |r, c| {
                let d = if r == c { C64::new(speed[r], 0.0) } else { ZERO };
                (d - y[(r, c)] / t) * j
            });
            linalg::hermitian_abs(&b)
        }
    }
}

/// `int dt / t <dGamma(b_t) F(|x| / t)>` on the full model, with `F` the electron cutoff.
pub fn photon_velocity_probe(
    prop: &mut Propagation,
    fm: &FullModel,
    monitor: PhotonMonitor,
    electron: Option<Switch>,
    beta: f64,
    use_modified: bool,
    times: &[f64],
) -> Result<PhotonTrack> {
    let warning = match monitor {
        PhotonMonitor::Window { lo, .. } if lo <= beta.max(1.0) => Some(format!(
            "window starts at {lo} <= max(1, beta) = {}; no decay is claimed",
            beta.max(1.0)
        )),
        _ => None,
    };
    let basis = fm.basis.clone();
    let spec = PositionSpectrum::new(&basis)?;
    let y = build_position_op(basis.grid())?;
    let speed: Vec<f64> = (0..basis.n_modes()).map(|j| basis.grid().grad_omega(j, use_modified)[0]).collect();
    let positions = electron_positions(fm);
    let track = track(prop, times, "photon_monitor", |t, psi| {
        let op = dgamma(&basis, &monitor_matrix(&spec, &y, &speed, monitor, t))?;
        let amps = electron_position_amplitudes(fm, psi)?;
        Ok(positions
            .iter()
            .zip(&amps)
            .map(|(x, row)| {
                let w = electron.map_or(1.0, |f| f.eval(x.abs() / t));
                if w == 0.0 {
                    0.0
                } else {
                    w * op.expectation(row).re
                }
            })
            .sum())
    })?;
    Ok(PhotonTrack { track, warning })
}

/// Fiber version of the photon monitor (no electron cutoff).
pub fn photon_monitor_fiber(
    prop: &mut Propagation,
    basis: &OccupationBasis,
    monitor: PhotonMonitor,
    use_modified: bool,
    times: &[f64],
) -> Result<ObservableTrack> {
    let spec = PositionSpectrum::new(basis)?;
    let y = build_position_op(basis.grid())?;
    let speed: Vec<f64> = (0..basis.n_modes()).map(|j| basis.grid().grad_omega(j, use_modified)[0]).collect();
    track(prop, times, "photon_monitor", |t, psi| {
        Ok(dgamma(basis, &monitor_matrix(&spec, &y, &speed, monitor, t))?.expectation(psi).re)
    })
}

/// `h_t = exp(-i omega t) h` on samples.
pub fn free_evolved(h: &[C64], omega: &[f64], t: f64) -> Vec<C64> {
    h.iter().zip(omega).map(|(x, w)| x * C64::from_polar(1.0, -w * t)).collect()
}

/// Cauchy diagnostic of the asymptotic creation operator: at consecutive
/// times `t_n < t_{n+1}`, the value is
/// `|| e^{iHt_{n+1}} a*(h_{t_{n+1}}) e^{-iHt_{n+1}} phi - e^{iHt_n} a*(h_{t_n}) e^{-iHt_n} phi ||`,
/// recorded at `t_{n+1}`.
pub fn asymptotic_field_probe(
    h: &SparseOperator,
    basis: &OccupationBasis,
    phi: &[C64],
    hfun: &[C64],
    omega: &[f64],
    times: &[f64],
    opts: &KrylovOptions,
) -> Result<ObservableTrack> {
    let mut prop = Propagation::new(h.clone(), phi.to_vec(), *opts)?;
    let mut out = ObservableTrack::new("field_cauchy");
    let mut prev: Option<Vec<C64>> = None;
    for &t in times {
        prop.advance_to(t)?;
        let a = creation_op(basis, &free_evolved(hfun, omega, t))?;
        let pulled = evolve(h, &a.matvec(&prop.state), -t, opts)?.0;
        if let Some(p) = &prev {
            let d = linalg::norm(&linalg::sub(&pulled, p));
            out.push(t, d, prop.norm_drift(), prop.energy_drift());
        }
        prev = Some(pulled);
    }
    Ok(out)
}

/// `|| a(h_t) e^{-iHt} phi ||` along `times`.
pub fn annihilation_probe(
    prop: &mut Propagation,
    basis: &OccupationBasis,
    hfun: &[C64],
    omega: &[f64],
    times: &[f64],
) -> Result<ObservableTrack> {
    track(prop, times, "annihilation_norm", |t, psi| {
        let a = annihilation_op(basis, &free_evolved(hfun, omega, t))?;
        Ok(linalg::norm(&a.matvec(psi)))
    })
}

/// Energy window `f` for `W`: 1 up to `lo`, 0 from `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
}

impl EnergyWindow {
    pub fn eval(&self, e: f64) -> f64 {
        fall(e, self.lo, self.hi)
    }
}

/// Krylov dimension used for `f(H)`.
pub const FILTER_KRYLOV_DIM: usize = 200;

/// `w(t) = <f psi_t, dGamma(chi_gamma(|y| / t)) f psi_t>`; `f` commutes with the evolution
/// and is applied once to the initial state.
pub fn w_estimate(
    h: &SparseOperator,
    basis: &OccupationBasis,
    psi0: &[C64],
    window: Option<EnergyWindow>,
    thresholds: &Thresholds,
    times: &[f64],
    opts: &KrylovOptions,
) -> Result<ObservableTrack> {
    thresholds.validate()?;
    let start = match window {
        Some(f) => krylov_function(h, psi0, FILTER_KRYLOV_DIM, |e| f.eval(e))?,
        None => psi0.to_vec(),
    };
    let spec = PositionSpectrum::new(basis)?;
    let mut prop = Propagation::new(h.clone(), start, *opts)?;
    track(&mut prop, times, "w", |t, psi| {
        Ok(spec.counter(basis, t, |s| thresholds.chi_gamma(s))?.expectation(psi).re)
    })
}

/// Tracks of `|| Gamma_breve(j_t) dGamma(chi_gamma,t) psi_t ||` and of its
/// outer-vacuum component.
#[derive(Debug, Clone)]
pub struct WPlusTracks {
    pub total: ObservableTrack,
    pub outer_vacuum: ObservableTrack,
    pub tensor_dim: usize,
}

/// Largest tensor dimension accepted by [`w_plus_probe`].
pub const W_PLUS_DIM_LIMIT: usize = 5000;

/// The extended-space evolution `e^{i H_ext t}` is unitary and is left out of the norms.
#[allow(clippy::too_many_arguments)]
pub fn w_plus_probe(
    h: &SparseOperator,
    basis: &std::sync::Arc<OccupationBasis>,
    psi0: &[C64],
    thresholds: &Thresholds,
    jinf_zero: bool,
    n_joint: usize,
    times: &[f64],
    opts: &KrylovOptions,
) -> Result<WPlusTracks> {
    thresholds.validate()?;
    let tb = TensorBasis::new(basis.clone(), basis.clone(), n_joint)?;
    if tb.dim() > W_PLUS_DIM_LIMIT {
        return Err(Error::InvalidConfig(format!(
            "extended dimension {} exceeds {W_PLUS_DIM_LIMIT}",
            tb.dim()
        )));
    }
    let spec = PositionSpectrum::new(basis)?;
    let vac = tb.right_vacuum_projector();
    let mut prop = Propagation::new(h.clone(), psi0.to_vec(), *opts)?;
    let mut total = ObservableTrack::new("w_plus_norm");
    let mut outer = ObservableTrack::new("w_plus_outer_vacuum");
    for &t in times {
        prop.advance_to(t)?;
        let j0 = spec.function(t, |s| thresholds.j0(s));
        let jinf = if jinf_zero {
            DMatrix::zeros(j0.nrows(), j0.ncols())
        } else {
            spec.function(t, |s| thresholds.jinf(s))
        };
        let sp = SplitPair::new(j0, jinf)?;
        let chi = spec.counter(basis, t, |s| thresholds.chi_gamma(s))?;
        let v = breve_gamma(&sp, basis, &tb)?.matvec(&chi.matvec(&prop.state));
        let (nd, ed) = (prop.norm_drift(), prop.energy_drift());
        total.push(t, linalg::norm(&v), nd, ed);
        outer.push(t, linalg::norm(&vac.matvec(&v)), nd, ed);
    }
    Ok(WPlusTracks {
        total,
        outer_vacuum: outer,
        tensor_dim: tb.dim(),
    })
}

/// Dense reference `exp(-iHt) v`.
pub fn evolve_dense(h: &SparseOperator, v: &[C64], t: f64) -> Vec<C64> {
    linalg::expm_apply_dense(&h.to_dense(), t, v)
}

/// Normalized one-boson state `a*(h) Omega` with a Gaussian profile in `k`.
pub fn one_boson_packet(basis: &OccupationBasis, k0: f64, width: f64, x0: f64) -> Result<Vec<C64>> {
    let grid = basis.grid();
    let h: Vec<C64> = (0..grid.n_modes())
        .map(|j| {
            let k = grid.point(j)[0];
            C64::from_polar((-(k - k0).powi(2) / (4.0 * width * width)).exp(), -k * x0)
        })
        .collect();
    let mut vac = vec![ZERO; basis.dim()];
    vac[0] = C64::new(1.0, 0.0);
    let mut v = creation_op(basis, &h)?.matvec(&vac);
    if linalg::normalize(&mut v) == 0.0 {
        return Err(Error::EmptySubspace("packet profile vanishes on the grid".into()));
    }
    Ok(v)
}

/// Removes the component along a unit vector.
pub fn project_out(v: &mut [C64], unit: &[C64]) {
    let c = linalg::dot(unit, v);
    linalg::axpy(-c, unit, v);
}

/// Keeps only basis states without soft bosons.
pub fn restrict_soft_free(basis: &OccupationBasis, v: &mut [C64]) {
    let keep = basis.soft_free_indices();
    let mut mask = vec![false; v.len()];
    for i in keep {
        mask[i] = true;
    }
    for (x, k) in v.iter_mut().zip(mask) {
        if !k {
            *x = ZERO;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::build_basis;
    use crate::fock::grid::ModeGrid;
    use crate::model::{build_fiber_h, DispersionLaw, FormFactor, ModelSpec};
    use crate::sample;
    use std::sync::Arc;

    fn fiber(m: usize, n_max: usize, g: f64) -> (ModelSpec, Arc<OccupationBasis>, SparseOperator) {
        let grid = Arc::new(ModeGrid::line(m, 1.5, 0.2).unwrap());
        let basis = Arc::new(build_basis(grid.clone(), n_max, None).unwrap());
        let ff = FormFactor::new(1.0, 1.5, 0.2).unwrap();
        let ms = ModelSpec::new(DispersionLaw::NonRelativistic { mass: 1.0 }, ff, grid, g, true).unwrap();
        let h = build_fiber_h(&ms, &[0.1, 0.0, 0.0], &basis).unwrap();
        (ms, basis, h)
    }

    #[test]
    fn krylov_matches_dense() {
        let (_, basis, h) = fiber(8, 2, 0.3);
        let mut rng = sample::rng(5);
        let v = sample::unit_vector(&mut rng, basis.dim());
        let (k, _) = evolve(&h, &v, 7.3, &KrylovOptions::default()).unwrap();
        let d = evolve_dense(&h, &v, 7.3);
        assert!(linalg::norm(&linalg::sub(&k, &d)) < 1e-9);
    }

    #[test]
    fn free_evolution_is_a_phase() {
        let (_, basis, h) = fiber(6, 2, 0.0);
        let mut rng = sample::rng(1);
        let v = sample::unit_vector(&mut rng, basis.dim());
        let (k, _) = evolve(&h, &v, 3.0, &KrylovOptions::default()).unwrap();
        let diag = h.diagonal_entries();
        for i in 0..v.len() {
            let want = v[i] * C64::from_polar(1.0, -diag[i].re * 3.0);
            assert!((k[i] - want).norm() < 1e-11);
        }
    }

    #[test]
    fn backwards_evolution_inverts() {
        let (_, basis, h) = fiber(6, 2, 0.4);
        let v = one_boson_packet(&basis, 0.6, 0.2, 0.0).unwrap();
        let (f, _) = evolve(&h, &v, 4.0, &KrylovOptions::default()).unwrap();
        let (b, _) = evolve(&h, &f, -4.0, &KrylovOptions::default()).unwrap();
        assert!(linalg::norm(&linalg::sub(&b, &v)) < 1e-10);
    }

    #[test]
    fn geometric_grid_ends_at_t_end() {
        let t = geometric_times(1.0, 1.5, 10.0).unwrap();
        assert_eq!(t[0], 1.0);
        assert_eq!(*t.last().unwrap(), 10.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn filter_of_identity_is_identity() {
        let (_, basis, h) = fiber(6, 2, 0.3);
        let mut rng = sample::rng(2);
        let v = sample::unit_vector(&mut rng, basis.dim());
        let f = krylov_function(&h, &v, basis.dim(), |_| 1.0).unwrap();
        assert!(linalg::norm(&linalg::sub(&f, &v)) < 1e-10);
    }

    #[test]
    fn thresholds_order_is_checked() {
        let mut t = Thresholds::default();
        assert!(t.validate_positivity().is_ok());
        t.gamma = 0.3;
        assert!(t.validate().is_err());
        let t = Thresholds {
            beta: 0.3,
            beta0: 0.31,
            beta1: 0.32,
            beta2: 0.33,
            beta3: 0.34,
            gamma: 0.5,
        };
        assert!(t.validate().is_ok() && t.validate_positivity().is_err());
    }

    #[test]
    fn zone_margin() {
        assert!(check_zone_margin(1.0, 0.3, 1.5).is_ok());
        assert!(check_zone_margin(1.0, 0.9, 1.5).is_err());
    }

    #[test]
    fn split_shapes_are_isometric_and_disjoint_from_counter() {
        let t = Thresholds::default();
        for i in 0..200 {
            let s = i as f64 * 0.005;
            assert!((t.j0(s).powi(2) + t.jinf(s).powi(2) - 1.0).abs() < 1e-14);
            assert_eq!(t.j0(s) * t.chi_gamma(s), 0.0);
        }
    }
}
