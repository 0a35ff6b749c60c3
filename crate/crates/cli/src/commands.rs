//! Subcommand bodies. Each returns an [`Outcome`]; writing files and exit
//! codes are left to the caller.

use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use nelsonlab_core::algebra::{run_algebra_suite, AlgebraConfig, Fault};
use nelsonlab_core::cutoff::fall;
use nelsonlab_core::dynamics::{
    check_zone_margin, dressed_packet, electron_velocity_probe, evolve_dense, geometric_times, one_boson_packet,
    project_out, restrict_soft_free, track, w_estimate, w_plus_probe, EnergyWindow, KrylovOptions, ObservableTrack,
    Propagation, Thresholds,
};
use nelsonlab_core::eigen::SolverOptions;
use nelsonlab_core::fock::{build_basis, number_op, ModeGrid, OccupationBasis};
use nelsonlab_core::linalg;
use nelsonlab_core::model::{build_fiber_h, build_full_h, g_beta, DispersionLaw, FormFactor, ModelSpec};
use nelsonlab_core::mourre::{mourre_sweep, virial_check, MourreSweep, Sector};
use nelsonlab_core::spectral::{dispersion_scan, fiber_ground_state, perturbative_energy};
use nelsonlab_core::sparse::C64;
use nelsonlab_core::stats::power_law_exponent;

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, Outcome, Table, Verdict};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] nelsonlab_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    NoConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nelsonlab_core::Error as E;
        match self {
            CliError::Core(E::NoConvergence { .. } | E::KrylovBreakdown { .. }) | CliError::NoConvergence(_) => 3,
            _ => 2,
        }
    }
}

pub type CmdResult = Result<Outcome, CliError>;

/// Tolerances fixed by the acceptance contract.
pub const MARGIN_TOL: f64 = 1e-10;
pub const FREE_TOL: f64 = 1e-12;
pub const SOFT_TOL: f64 = 1e-10;
pub const NORM_RATE: f64 = 1e-9;
pub const ENERGY_RATE: f64 = 1e-8;
pub const FINAL_NORM_TOL: f64 = 1e-10;
pub const DENSE_TOL: f64 = 1e-8;
pub const DENSE_DIM: usize = 400;
pub const ELECTRON_FINAL: f64 = 1e-3;
pub const W_DRESSED: f64 = 1e-6;
pub const W_FREE: f64 = 0.05;

fn invalid(key: &str, msg: impl Into<String>) -> CliError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
    .into()
}

pub fn total_momentum(cfg: &RunConfig) -> [f64; 3] {
    [cfg.f64("model.total_momentum"), 0.0, 0.0]
}

pub fn build_grid(cfg: &RunConfig, sigma: f64) -> Result<ModeGrid, CliError> {
    let kmax = cfg.f64("grid.kmax");
    Ok(match cfg.raw("grid.kind") {
        "line" => ModeGrid::line(cfg.usize("grid.modes"), kmax, sigma)?,
        "lattice" => ModeGrid::lattice(cfg.usize("grid.sites"), cfg.f64("grid.spacing"), kmax, sigma)?,
        _ => ModeGrid::radial(cfg.usize("grid.shells"), kmax, cfg.usize("grid.directions"), sigma)?,
    })
}

pub fn dispersion_law(cfg: &RunConfig) -> DispersionLaw {
    let mass = cfg.f64("model.mass");
    match cfg.raw("model.dispersion") {
        "relativistic" => DispersionLaw::Relativistic { mass },
        _ => DispersionLaw::NonRelativistic { mass },
    }
}

/// Model and basis with the infrared cutoff scaled by `sigma_factor`.
pub fn build_model_scaled(cfg: &RunConfig, sigma_factor: f64) -> Result<(ModelSpec, Arc<OccupationBasis>), CliError> {
    let sigma = cfg.f64("ff.sigma") * sigma_factor;
    let grid = Arc::new(build_grid(cfg, sigma)?);
    let ff = FormFactor::new(cfg.f64("ff.kappa0"), cfg.f64("ff.lambda"), sigma)?;
    let ms = ModelSpec::new(
        dispersion_law(cfg),
        ff,
        grid.clone(),
        cfg.f64("model.coupling"),
        cfg.bool("model.modified_dispersion"),
    )?;
    let basis = Arc::new(build_basis(grid, cfg.usize("basis.n_max"), cfg.opt_f64("basis.energy_cap"))?);
    Ok((ms, basis))
}

pub fn build_model(cfg: &RunConfig) -> Result<(ModelSpec, Arc<OccupationBasis>), CliError> {
    build_model_scaled(cfg, 1.0)
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.f64("solver.tol"),
        krylov_dim: cfg.usize("solver.krylov_dim"),
        max_restarts: cfg.usize("solver.max_restarts"),
        ..Default::default()
    }
}

pub fn krylov_options(cfg: &RunConfig) -> KrylovOptions {
    KrylovOptions {
        krylov_dim: cfg.usize("dynamics.krylov_dim"),
        step_tol: cfg.f64("dynamics.step_tol"),
        max_step: cfg.f64("dynamics.max_step"),
        ..Default::default()
    }
}

pub fn thresholds(cfg: &RunConfig) -> Result<Thresholds, CliError> {
    let t = Thresholds {
        beta: cfg.f64("cutoff.beta"),
        beta0: cfg.f64("cutoff.beta0"),
        beta1: cfg.f64("cutoff.beta1"),
        beta2: cfg.f64("cutoff.beta2"),
        beta3: cfg.f64("cutoff.beta3"),
        gamma: cfg.f64("cutoff.gamma"),
    };
    t.validate()?;
    Ok(t)
}

pub fn times(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    Ok(geometric_times(
        cfg.f64("dynamics.t0"),
        cfg.f64("dynamics.ratio"),
        cfg.f64("dynamics.t_end"),
    )?)
}

fn track_table(name: &str, tr: &ObservableTrack) -> Table {
    let mut t = Table::new(name, &["t", "value", "running_integral", "norm_drift", "energy_drift"]);
    for p in &tr.points {
        t.push(vec![num(p.t), num(p.value), num(p.running), num(p.norm_drift), num(p.energy_drift)]);
    }
    t
}

fn conservation_verdicts(out: &mut Outcome, tr: &ObservableTrack) {
    let (nr, er) = tr.drift_rates();
    out.verdicts.push(Verdict::at_most("norm_drift_rate", nr, NORM_RATE));
    out.verdicts.push(Verdict::at_most("energy_drift_rate", er, ENERGY_RATE));
    out.verdicts.push(Verdict::new(
        "track_finite",
        tr.is_finite(),
        f64::NAN,
        f64::NAN,
        "all samples finite",
    ));
}

pub fn cmd_algebra(cfg: &RunConfig) -> CmdResult {
    let ac = AlgebraConfig {
        n_modes: cfg.usize("algebra.modes"),
        n_max: cfg.usize("algebra.n_max"),
        kmax: cfg.f64("algebra.kmax"),
        sigma: cfg.f64("ff.sigma"),
        draws: cfg.usize("algebra.draws"),
        seed: cfg.u64("seed"),
        tol: cfg.f64("algebra.tol"),
        fault: match cfg.raw("algebra.fault") {
            "creation_entry" => Some(Fault::CreationEntry),
            _ => None,
        },
    };
    let r = run_algebra_suite(&ac)?;
    let mut out = Outcome::default();
    let mut t = Table::new("identities", &["identity", "worst", "tol", "passed"]);
    for c in &r.checks {
        t.push(vec![c.name.to_string(), num(c.worst), num(c.tol), c.passed.to_string()]);
        out.verdicts.push(Verdict::new(
            c.name,
            c.passed,
            c.worst,
            c.tol,
            format!("worst deviation {:e}", c.worst),
        ));
    }
    out.tables.push(t);
    out.result("basis_dim", r.basis_dim);
    out.result("tensor_dim", r.tensor_dim);
    out.result("guarded_states", r.guarded_states);
    out.result("vacuous", r.vacuous);
    if r.vacuous {
        out.result("note", "guarded sector is empty; identities hold vacuously");
    }
    Ok(out)
}

pub fn cmd_dispersion(cfg: &RunConfig) -> CmdResult {
    let (ms, basis) = build_model(cfg)?;
    let opts = solver_options(cfg);
    let beta = cfg.f64("dispersion.beta");
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("dispersion.beta", "must lie in (0, 1)"));
    }
    let n = cfg.usize("dispersion.points");
    if n == 0 {
        return Err(invalid("dispersion.points", "must be positive"));
    }
    let (lo, hi) = (cfg.f64("dispersion.p_min"), cfg.f64("dispersion.p_max"));
    let ps: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            [lo + s * (hi - lo), 0.0, 0.0]
        })
        .collect();
    let curve = dispersion_scan(&ms, &ps, &basis, beta, &opts)?;
    let mut out = Outcome::default();

    let mut t = Table::new(
        "curve",
        &[
            "p",
            "e_g",
            "e_0",
            "omega_p",
            "upper_margin",
            "lower_margin",
            "gap",
            "soft_occupancy",
            "free_vs_mod",
            "within_o_beta",
            "residual",
            "converged",
        ],
    );
    for p in &curve.points {
        t.push(vec![
            num(p.p[0]),
            num(p.e_g),
            num(p.e_0),
            num(p.omega_p),
            num(p.upper_margin),
            num(p.lower_margin),
            num(p.gap),
            num(p.soft_occupancy),
            num(p.free_vs_mod),
            p.within_o_beta.to_string(),
            num(p.residual),
            p.converged.to_string(),
        ]);
    }
    out.tables.push(t);
    if let Some(p) = curve.points.iter().find(|p| !p.converged) {
        let why = p.error.clone().unwrap_or_else(|| format!("residual {:e}", p.residual));
        return Err(CliError::NoConvergence(format!("dispersion point P = {}: {why}", p.p[0])));
    }

    out.verdicts.push(Verdict::at_least("upper_bound", curve.min_upper_margin(), -MARGIN_TOL));
    out.verdicts.push(Verdict::at_least("sandwich_lower", curve.min_lower_margin(), -MARGIN_TOL));
    let min_gap = curve.points.iter().map(|p| p.gap).fold(f64::INFINITY, f64::min);
    out.verdicts.push(Verdict::new("gap_positive", min_gap > 0.0, min_gap, 0.0, format!("min gap {min_gap:e}")));

    if ms.g == 0.0 {
        // Where the vacuum is the free ground state, E_g and Omega must coincide.
        let o1 = ms.disp.o_beta(1.0)?;
        let dev = curve
            .points
            .iter()
            .filter(|p| p.omega_p <= o1)
            .map(|p| (p.e_g - p.omega_p).abs())
            .fold(0.0, f64::max);
        out.verdicts.push(Verdict::at_most("free_exactness", dev, FREE_TOL));
    }

    let gb = g_beta(&ms.disp, &ms.ff, beta, &ms.grid)?;
    if ms.g.abs() <= 0.5 * gb {
        out.verdicts.push(Verdict::new(
            "soft_occupancy",
            curve.max_soft_occupancy() < SOFT_TOL,
            curve.max_soft_occupancy(),
            SOFT_TOL,
            format!("|g| = {} <= g_beta / 2 = {}", ms.g.abs(), 0.5 * gb),
        ));
    } else {
        out.result("soft_occupancy_note", format!("|g| = {} exceeds g_beta / 2 = {}; no claim", ms.g.abs(), 0.5 * gb));
    }

    let couplings = cfg.list("dispersion.pt_couplings");
    if !couplings.is_empty() {
        let p = total_momentum(cfg);
        let mut pt = Table::new("perturbative", &["g", "e_g", "e_pt", "residual"]);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &g in &couplings {
            let m = ms.with_coupling(g);
            let e = fiber_ground_state(&m, &p, &basis, 1, &opts)?.ground_energy();
            let ept = perturbative_energy(&m, &p);
            let res = (e - ept).abs();
            pt.push(vec![num(g), num(e), num(ept), num(res)]);
            xs.push(g.abs());
            ys.push(res);
        }
        out.tables.push(pt);
        if xs.len() >= 2 {
            let pexp = power_law_exponent(&xs, &ys);
            out.result("pt_exponent", pexp);
            out.verdicts.push(Verdict::new(
                "perturbative_exponent",
                (3.7..=4.3).contains(&pexp),
                pexp,
                4.0,
                format!("fitted exponent {pexp:.4} in [3.7, 4.3]"),
            ));
        }
    }
    out.result("g_beta", gb);
    out.result("o_beta", curve.o_beta);
    out.result("c_const", curve.c_const);
    out.result("min_upper_margin", curve.min_upper_margin());
    out.result("min_lower_margin", curve.min_lower_margin());
    out.result("max_soft_occupancy", curve.max_soft_occupancy());
    out.result("min_gap", min_gap);
    out.result("basis_dim", basis.dim());
    Ok(out)
}

fn sweep_table(name: &str, sw: &MourreSweep) -> Table {
    let mut t = Table::new(
        name,
        &["g", "window_dim", "beta", "ground_energy", "min_r", "deficit", "form_bound", "fitted_c"],
    );
    for r in &sw.reports {
        t.push(vec![
            num(r.g),
            r.window_dim.to_string(),
            num(r.beta),
            num(r.ground_energy),
            num(r.min_r),
            num(r.deficit),
            num(r.form_bound),
            num(r.fitted_c),
        ]);
    }
    t
}

pub fn cmd_mourre(cfg: &RunConfig) -> CmdResult {
    let (ms, basis) = build_model(cfg)?;
    let p = total_momentum(cfg);
    let sector = match cfg.raw("mourre.sector") {
        "soft_free" => Sector::SoftFree,
        _ => Sector::Full,
    };
    let window = cfg.f64("mourre.window");
    let couplings = cfg.list("mourre.couplings");
    if couplings.is_empty() {
        return Err(invalid("mourre.couplings", "needs at least one coupling"));
    }
    let samples = cfg.usize("mourre.samples");
    let seed = cfg.u64("seed");
    let sw = mourre_sweep(&ms, &p, &basis, sector, window, &couplings, samples, seed)?;
    let mut out = Outcome::default();
    out.tables.push(sweep_table("sweep", &sw));
    let mut st = Table::new("samples", &["g", "sample", "r", "q", "number"]);
    for r in &sw.reports {
        for (i, s) in r.samples.iter().enumerate() {
            st.push(vec![num(r.g), i.to_string(), num(s.r), num(s.q), num(s.number)]);
        }
    }
    out.tables.push(st);

    if let Some(r0) = sw.reports.iter().find(|r| r.g == 0.0) {
        out.verdicts.push(Verdict::at_least("positivity_at_zero_coupling", r0.min_r, -MARGIN_TOL));
    }
    if sw.slope.is_finite() {
        out.verdicts.push(Verdict::new(
            "coupling_slope",
            (sw.slope - 1.0).abs() <= 0.2,
            sw.slope,
            1.0,
            format!("log-log slope {:.4} within 1 +- 0.2", sw.slope),
        ));
    }
    out.result("slope", sw.slope);
    out.result("fitted_c", sw.fitted_c);
    out.result("mesh", sw.reports[0].mesh);
    out.result("dim", sw.reports[0].dim);
    out.result("n_max", sw.reports[0].n_max);

    let vr = virial_check(&ms, &p, &basis, &solver_options(cfg))?;
    out.verdicts.push(Verdict::new(
        "virial",
        vr.within(10.0),
        vr.residual,
        10.0 * (vr.eigen_residual + vr.mesh * vr.mesh * vr.scale),
        format!(
            "residual {:e}, eigen residual {:e}, mesh {:e}, scale {:e}",
            vr.residual, vr.eigen_residual, vr.mesh, vr.scale
        ),
    ));
    out.result(
        "virial",
        json!({
            "residual": vr.residual,
            "residual_discrete": vr.residual_discrete,
            "eigen_residual": vr.eigen_residual,
            "mesh": vr.mesh,
            "scale": vr.scale,
            "soft_weight": vr.soft_weight,
        }),
    );

    if cfg.bool("mourre.compare_half_sigma") {
        let (ms2, basis2) = build_model_scaled(cfg, 0.5)?;
        let sw2 = mourre_sweep(&ms2, &p, &basis2, sector, window, &couplings, samples, seed)?;
        out.tables.push(sweep_table("half_sigma", &sw2));
        let rel = (sw.fitted_c - sw2.fitted_c).abs() / sw.fitted_c.abs().max(sw2.fitted_c.abs());
        out.verdicts.push(Verdict::new(
            "sigma_independence",
            rel <= 0.05,
            rel,
            0.05,
            format!("fitted C {:.4} (sigma) vs {:.4} (sigma/2)", sw.fitted_c, sw2.fitted_c),
        ));
        out.result("fitted_c_half_sigma", sw2.fitted_c);
    }
    Ok(out)
}

/// Initial state of the fiber runs named by `w.state`.
pub fn fiber_state(cfg: &RunConfig, ms: &ModelSpec, basis: &OccupationBasis) -> Result<Vec<C64>, CliError> {
    let p = total_momentum(cfg);
    let packet = || one_boson_packet(basis, cfg.f64("packet.k0"), cfg.f64("packet.width"), cfg.f64("packet.x0"));
    Ok(match cfg.raw("w.state") {
        "dressed" => fiber_ground_state(ms, &p, basis, 1, &solver_options(cfg))?.eigenvectors[0].clone(),
        "boson" => packet()?,
        _ => {
            let mut v = packet()?;
            let gs = fiber_ground_state(ms, &p, basis, 1, &solver_options(cfg))?;
            project_out(&mut v, gs.ground_vector());
            restrict_soft_free(basis, &mut v);
            if linalg::normalize(&mut v) == 0.0 {
                return Err(invalid("w.state", "excited state vanishes after projection"));
            }
            v
        }
    })
}

fn evolve_fiber(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let (ms, basis) = build_model(cfg)?;
    let h = build_fiber_h(&ms, &total_momentum(cfg), &basis)?;
    let psi0 = one_boson_packet(&basis, cfg.f64("packet.k0"), cfg.f64("packet.width"), cfg.f64("packet.x0"))?;
    let ts = times(cfg)?;
    let t_end = *ts.last().expect("time grid is never empty");
    let number = number_op(&basis);
    let mut prop = Propagation::new(h.clone(), psi0.clone(), krylov_options(cfg))?;
    let tr = track(&mut prop, &ts, "number", |_, psi| Ok(number.expectation(psi).re))?;
    out.tables.push(track_table("number", &tr));
    conservation_verdicts(out, &tr);
    out.verdicts.push(Verdict::at_most("final_norm", prop.norm_drift(), FINAL_NORM_TOL));
    if basis.dim() <= DENSE_DIM {
        let dense = evolve_dense(&h, &psi0, t_end);
        let d = linalg::norm(&linalg::sub(&prop.state, &dense));
        out.verdicts.push(Verdict::at_most("krylov_vs_dense", d, DENSE_TOL));
    }
    if ms.g == 0.0 {
        // Diagonal H: each amplitude only picks up its phase.
        let diag = h.diagonal_entries();
        let dev = (0..psi0.len())
            .map(|i| (prop.state[i] - psi0[i] * C64::from_polar(1.0, -diag[i].re * t_end)).norm())
            .fold(0.0, f64::max);
        out.verdicts.push(Verdict::at_most("phase_exactness", dev, FINAL_NORM_TOL));
    }
    out.result("dim", basis.dim());
    out.result("steps", prop.steps);
    Ok(())
}

fn evolve_full(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    if cfg.raw("grid.kind") != "lattice" {
        return Err(invalid("grid.kind", "the full model needs a lattice grid"));
    }
    let (ms, basis) = build_model(cfg)?;
    let th = thresholds(cfg)?;
    let pmax = cfg.f64("dynamics.packet_pmax");
    if !(pmax > 0.0) {
        return Err(invalid("dynamics.packet_pmax", "must be positive"));
    }
    check_zone_margin(cfg.f64("grid.spacing"), pmax, cfg.f64("grid.kmax"))?;
    let fm = build_full_h(&ms, cfg.usize("grid.sites"), basis)?;
    let disp = ms.disp.clone();
    let pk = dressed_packet(
        &fm,
        |p| disp.grad(&[p, 0.0, 0.0])[0].abs(),
        |p| {
            let s = p.abs() / pmax;
            C64::new(if s < 1.0 { fall(s, 0.0, 1.0) } else { 0.0 }, 0.0)
        },
    )?;
    out.verdicts.push(Verdict::at_most("packet_velocity", pk.velocity_bound, th.beta));
    let mut prop = Propagation::new(fm.h.clone(), pk.state, krylov_options(cfg))?;
    let tr = electron_velocity_probe(&mut prop, &fm, th.electron_cutoff(), &times(cfg)?)?;
    out.tables.push(track_table("electron_cutoff", &tr));
    conservation_verdicts(out, &tr);
    out.verdicts.push(Verdict::at_most("electron_cutoff_final", tr.final_value(), ELECTRON_FINAL));
    out.verdicts.push(Verdict::new(
        "electron_cutoff_decreasing_tail",
        tr.decreasing_tail(4, 1e-12),
        tr.final_value(),
        f64::NAN,
        "last four samples non-increasing",
    ));
    out.result("dim", fm.dim());
    out.result("packet_orders", pk.orders.len());
    out.result("velocity_bound", pk.velocity_bound);
    out.result("final_value", tr.final_value());
    out.result("steps", prop.steps);
    Ok(())
}

pub fn cmd_evolve(cfg: &RunConfig) -> CmdResult {
    let mut out = Outcome::default();
    match cfg.raw("dynamics.target") {
        "full" => evolve_full(cfg, &mut out)?,
        _ => evolve_fiber(cfg, &mut out)?,
    }
    Ok(out)
}

pub fn cmd_w(cfg: &RunConfig) -> CmdResult {
    let (ms, basis) = build_model(cfg)?;
    let th = thresholds(cfg)?;
    let h = build_fiber_h(&ms, &total_momentum(cfg), &basis)?;
    let psi0 = fiber_state(cfg, &ms, &basis)?;
    let window = match (cfg.opt_f64("w.filter_lo"), cfg.opt_f64("w.filter_hi")) {
        (Some(lo), Some(hi)) if lo < hi => Some(EnergyWindow { lo, hi }),
        (None, None) => None,
        _ => return Err(invalid("w.filter_lo", "give both filter edges with lo < hi, or neither")),
    };
    let tr = w_estimate(&h, &basis, &psi0, window, &th, &times(cfg)?, &krylov_options(cfg))?;
    let mut out = Outcome::default();
    out.tables.push(track_table("w", &tr));
    conservation_verdicts(&mut out, &tr);
    let w = tr.final_value();
    let state = cfg.raw("w.state");
    out.verdicts.push(match state {
        "dressed" => Verdict::at_most("w_vanishes", w, W_DRESSED),
        "boson" => Verdict::new(
            "w_counts_free_boson",
            (w - 1.0).abs() <= W_FREE,
            w,
            1.0,
            format!("final w {w:.6} within 1 +- {W_FREE}"),
        ),
        _ => Verdict::new("w_positive", w > W_DRESSED, w, W_DRESSED, format!("final w {w:e} > {W_DRESSED:e}")),
    });
    out.result("state", state);
    out.result("final_w", w);
    out.result("dim", basis.dim());
    Ok(out)
}

pub fn cmd_wplus(cfg: &RunConfig) -> CmdResult {
    let (ms, basis) = build_model(cfg)?;
    let th = thresholds(cfg)?;
    let h = build_fiber_h(&ms, &total_momentum(cfg), &basis)?;
    let psi0 = fiber_state(cfg, &ms, &basis)?;
    let tr = w_plus_probe(
        &h,
        &basis,
        &psi0,
        &th,
        cfg.bool("wplus.jinf_zero"),
        cfg.usize("wplus.n_joint"),
        &times(cfg)?,
        &krylov_options(cfg),
    )?;
    let mut out = Outcome::default();
    out.tables.push(track_table("total", &tr.total));
    out.tables.push(track_table("outer_vacuum", &tr.outer_vacuum));
    conservation_verdicts(&mut out, &tr.total);
    // j0 and chi_gamma have disjoint supports, so nothing reaches the outer vacuum.
    let outer = tr.outer_vacuum.values().into_iter().fold(0.0, f64::max);
    out.verdicts.push(Verdict::at_most("outer_vacuum_vanishes", outer, MARGIN_TOL));
    let bound = basis.n_max() as f64;
    let top = tr.total.values().into_iter().fold(0.0, f64::max);
    out.verdicts.push(Verdict::at_most("number_bound", top, bound));
    out.result("tensor_dim", tr.tensor_dim);
    out.result("final_norm", tr.total.final_value());
    Ok(out)
}

/// Collects the manifests in `dir` into one summary.
pub fn cmd_report(dir: &Path) -> CmdResult {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_stem().is_some_and(|s| s != "report"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ConfigError::Io(format!("no manifests in {}", dir.display())).into());
    }
    let mut out = Outcome::default();
    let mut t = Table::new("summary", &["command", "verdict", "passed", "value", "limit"]);
    let mut runs = Vec::new();
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        let m: Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", p.display())))?;
        let command = m["command"].as_str().unwrap_or("?").to_string();
        for v in m["verdicts"].as_array().into_iter().flatten() {
            let name = v["name"].as_str().unwrap_or("?");
            let passed = v["passed"].as_bool().unwrap_or(false);
            let value = v["value"].as_f64().unwrap_or(f64::NAN);
            let limit = v["limit"].as_f64().unwrap_or(f64::NAN);
            t.push(vec![command.clone(), name.to_string(), passed.to_string(), num(value), num(limit)]);
            out.verdicts.push(Verdict::new(&format!("{command}.{name}"), passed, value, limit, ""));
        }
        runs.push(json!({"command": command, "config_hash": m["config_hash"], "passed": m["passed"]}));
    }
    out.tables.push(t);
    out.result("runs", runs);
    Ok(out)
}
