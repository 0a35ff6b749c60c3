//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Criteria listed in `DOCUMENTED_FAILURES` still print FAIL when they fail;
//! they do not change the exit status. Any other failure does.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nelsonlab_cli::commands::{build_model, cmd_dispersion, cmd_evolve, cmd_mourre, cmd_w, solver_options};
use nelsonlab_cli::config::RunConfig;
use nelsonlab_cli::output::Outcome;
use nelsonlab_core::algebra::{run_algebra_suite, AlgebraConfig};
use nelsonlab_core::dynamics::{evolve, evolve_dense, KrylovOptions};
use nelsonlab_core::eigen::SolverOptions;
use nelsonlab_core::fock::{build_basis, ModeGrid};
use nelsonlab_core::linalg;
use nelsonlab_core::model::{build_fiber_h, g_beta, DispersionLaw, FormFactor, ModelSpec};
use nelsonlab_core::mourre::virial_check;
use nelsonlab_core::sample;
use nelsonlab_core::spectral::{dispersion_scan, fiber_ground_state, perturbative_energy};
use nelsonlab_core::stats::power_law_exponent;

/// Criteria known to fail at desk scale, with the reason.
const DOCUMENTED_FAILURES: &[(&str, &str)] = &[(
    "AC7",
    "the Mourre constant moves by about 7% between sigma and sigma/2 on the 10-shell radial grid",
)];

type Check = Result<(bool, String), String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn verdict(out: &Outcome, name: &str) -> Result<(bool, f64), String> {
    out.verdicts
        .iter()
        .find(|v| v.name == name)
        .map(|v| (v.passed, v.value))
        .ok_or_else(|| format!("verdict {name} missing"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn line_model(m: usize, n_max: usize, g: f64, disp: DispersionLaw) -> (ModelSpec, nelsonlab_core::fock::OccupationBasis) {
    let grid = Arc::new(ModeGrid::line(m, 2.0, 0.2).unwrap());
    let basis = build_basis(grid.clone(), n_max, None).unwrap();
    let ff = FormFactor::new(1.0, 1.5, 0.2).unwrap();
    (ModelSpec::new(disp, ff, grid, g, true).unwrap(), basis)
}

fn algebra_suite() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (n_modes, n_max) in [(4, 3), (4, 2), (2, 3)] {
        let cfg = AlgebraConfig {
            n_modes,
            n_max,
            draws: 100,
            tol: 1e-12,
            ..Default::default()
        };
        let r = run_algebra_suite(&cfg).map_err(err)?;
        for c in &r.checks {
            worst = worst.max(c.worst);
            if !c.passed {
                failed.push(format!("{}(M={n_modes},n_max={n_max})", c.name));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        failed.is_empty() && secs < 10.0,
        format!("worst deviation {worst:.2e}, {secs:.2} s, failing: {failed:?}"),
    ))
}

fn free_exactness() -> Check {
    let mut worst_e = 0.0f64;
    let mut worst_v = 0.0f64;
    let mut count = 0;
    for disp in [
        DispersionLaw::NonRelativistic { mass: 1.0 },
        DispersionLaw::Relativistic { mass: 1.0 },
    ] {
        let (ms, basis) = line_model(16, 3, 0.0, disp.clone());
        let o1 = disp.o_beta(1.0).map_err(err)?;
        for i in 0..20 {
            let p = -0.95 + 0.1 * i as f64;
            let omega = disp.eval(&[p, 0.0, 0.0]);
            if omega > o1 {
                return Err(format!("sample P = {p} lies above O_1"));
            }
            let r = fiber_ground_state(&ms, &[p, 0.0, 0.0], &basis, 1, &SolverOptions::default()).map_err(err)?;
            let v = r.ground_vector();
            let off: f64 = v[1..].iter().map(|x| x.norm_sqr()).sum::<f64>() + (1.0 - v[0].norm()).powi(2);
            worst_e = worst_e.max((r.ground_energy() - omega).abs());
            worst_v = worst_v.max(off.sqrt());
            count += 1;
        }
    }
    Ok((
        worst_e <= 1e-12 && worst_v <= 1e-12,
        format!("{count} samples, energy {worst_e:.2e}, vector {worst_v:.2e}"),
    ))
}

fn perturbative_oracle() -> Check {
    let start = Instant::now();
    let (ms, basis) = line_model(40, 3, 0.0, DispersionLaw::NonRelativistic { mass: 1.0 });
    let gs = [0.01, 0.02, 0.04, 0.08];
    let mut res = Vec::new();
    for &g in &gs {
        let m = ms.with_coupling(g);
        let e = fiber_ground_state(&m, &[0.0; 3], &basis, 1, &SolverOptions::default())
            .map_err(err)?
            .ground_energy();
        res.push((e - perturbative_energy(&m, &[0.0; 3])).abs());
    }
    let p = power_law_exponent(&gs, &res);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        (3.7..=4.3).contains(&p) && secs < 120.0 && basis.dim() <= 20_000,
        format!("exponent {p:.4}, dim {}, {secs:.1} s", basis.dim()),
    ))
}

fn sandwich_bounds() -> Check {
    let out = cmd_dispersion(&RunConfig::default()).map_err(err)?;
    let (upper_ok, upper) = verdict(&out, "upper_bound")?;
    let (lower_ok, lower) = verdict(&out, "sandwich_lower")?;
    Ok((
        upper_ok && lower_ok,
        format!("min upper margin {upper:.3e}, min sandwich margin {lower:.3e}"),
    ))
}

fn soft_absence() -> Check {
    let cfg = RunConfig::default();
    let (ms, basis) = build_model(&cfg).map_err(err)?;
    let beta = cfg.f64("dispersion.beta");
    let gb = g_beta(&ms.disp, &ms.ff, beta, &ms.grid).map_err(err)?;
    let ps: Vec<[f64; 3]> = (0..21).map(|i| [-1.0 + 0.1 * i as f64, 0.0, 0.0]).collect();
    let mut worst = 0.0f64;
    for g in [0.5 * gb, -0.5 * gb, 0.25 * gb] {
        let curve = dispersion_scan(&ms.with_coupling(g), &ps, &basis, beta, &solver_options(&cfg)).map_err(err)?;
        if !curve.all_converged() {
            return Err(format!("scan at g = {g} did not converge"));
        }
        worst = worst.max(curve.max_soft_occupancy());
    }
    Ok((worst < 1e-10, format!("g_beta {gb:.4}, max soft occupancy {worst:.2e}")))
}

fn virial() -> Check {
    let cfg = RunConfig::default();
    let (ms, basis) = build_model(&cfg).map_err(err)?;
    let opts = solver_options(&cfg);
    let p = [cfg.f64("model.total_momentum"), 0.0, 0.0];
    let v = virial_check(&ms, &p, &basis, &opts).map_err(err)?;
    // The scale constant is measured independently on a grid with half the mesh.
    let mut fine = cfg.clone();
    fine.set("grid.modes", &(2 * cfg.usize("grid.modes")).to_string()).map_err(err)?;
    let (ms2, basis2) = build_model(&fine).map_err(err)?;
    let v2 = virial_check(&ms2, &p, &basis2, &opts).map_err(err)?;
    let bound = 10.0 * (v.eigen_residual + v.mesh * v.mesh * v2.scale);
    Ok((
        v.residual <= bound,
        format!(
            "residual {:.3e} <= {bound:.3e} (eigen residual {:.1e}, mesh {}, scale {:.4e}, scale at half mesh {:.4e})",
            v.residual, v.eigen_residual, v.mesh, v.scale, v2.scale
        ),
    ))
}

fn mourre() -> Check {
    let out = cmd_mourre(&load("mourre_radial.ini")).map_err(err)?;
    let (pos_ok, min_r) = verdict(&out, "positivity_at_zero_coupling")?;
    let (slope_ok, slope) = verdict(&out, "coupling_slope")?;
    let (sigma_ok, rel) = verdict(&out, "sigma_independence")?;
    let c = out.results["fitted_c"].as_f64().unwrap_or(f64::NAN);
    let c2 = out.results["fitted_c_half_sigma"].as_f64().unwrap_or(f64::NAN);
    Ok((
        pos_ok && slope_ok && sigma_ok,
        format!(
            "min_r(g=0) {min_r:.3e} [{}], slope {slope:.4} [{}], C {c:.4} vs {c2:.4} at sigma/2, rel {:.1}% [{}]",
            pf(pos_ok),
            pf(slope_ok),
            100.0 * rel,
            pf(sigma_ok)
        ),
    ))
}

fn conservation() -> Check {
    let out = cmd_evolve(&RunConfig::default()).map_err(err)?;
    let (n_ok, nr) = verdict(&out, "norm_drift_rate")?;
    let (e_ok, er) = verdict(&out, "energy_drift_rate")?;
    let (f_ok, fd) = verdict(&out, "final_norm")?;
    let (ms, basis) = line_model(8, 3, 0.05, DispersionLaw::NonRelativistic { mass: 1.0 });
    let h = build_fiber_h(&ms, &[0.2, 0.0, 0.0], &basis).map_err(err)?;
    let mut rng = sample::rng(1);
    let v = sample::unit_vector(&mut rng, basis.dim());
    let mut worst = 0.0f64;
    for t in [1.0, 10.0, 100.0] {
        let (k, _) = evolve(&h, &v, t, &KrylovOptions::default()).map_err(err)?;
        worst = worst.max(linalg::norm(&linalg::sub(&k, &evolve_dense(&h, &v, t))));
    }
    Ok((
        n_ok && e_ok && f_ok && worst <= 1e-8,
        format!(
            "norm rate {nr:.2e}, energy rate {er:.2e}, norm drift at t=100 {fd:.2e}, krylov vs dense {worst:.2e} (dim {})",
            basis.dim()
        ),
    ))
}

fn electron_velocity() -> Check {
    let mut finals = Vec::new();
    let mut ok = true;
    for name in ["electron_velocity_a1.ini", "electron_velocity_a05.ini"] {
        let out = cmd_evolve(&load(name)).map_err(err)?;
        let (f_ok, v) = verdict(&out, "electron_cutoff_final")?;
        let (t_ok, _) = verdict(&out, "electron_cutoff_decreasing_tail")?;
        ok &= f_ok && t_ok && out.passed();
        finals.push(v);
    }
    let rel = (finals[0] - finals[1]).abs() / finals[0].max(finals[1]);
    Ok((
        ok && rel <= 0.1,
        format!("final <F> {:.4e} (a=1), {:.4e} (a=0.5), rel {:.2e}", finals[0], finals[1], rel),
    ))
}

fn w_behaviour() -> Check {
    let final_w = |name: &str| -> Result<(bool, f64), String> {
        let out = cmd_w(&load(name)).map_err(err)?;
        Ok((out.passed(), out.results["final_w"].as_f64().unwrap_or(f64::NAN)))
    };
    let (d_ok, wd) = final_w("w_dressed.ini")?;
    let (b_ok, wb) = final_w("w_free_boson.ini")?;
    let (e2_ok, w2) = final_w("w_excited_n2.ini")?;
    let (e3_ok, w3) = final_w("w_excited_n3.ini")?;
    let rel = (w2 - w3).abs() / w2.max(w3);
    let excited = e2_ok && e3_ok && w2 > 0.0 && w3 > 0.0 && rel <= 0.2;
    Ok((
        d_ok && wd < 1e-6 && b_ok && (wb - 1.0).abs() <= 0.05 && excited,
        format!("dressed {wd:.2e}, free boson {wb:.5}, excited {w2:.5} (n_max 2) vs {w3:.5} (n_max 3)"),
    ))
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_nelsonlab");
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        for cmd in ["dispersion", "mourre", "evolve", "w", "wplus"] {
            let status = Command::new(bin)
                .args([cmd, "--threads", threads, "--out"])
                .arg(dir.path())
                .output()
                .map_err(err)?
                .status;
            if status.code() != Some(0) {
                return Err(format!("{cmd} exited with {status}"));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(dirs[0].path().join(n)).ok() != std::fs::read(dirs[1].path().join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    Ok((
        differing.is_empty() && !names.is_empty(),
        format!("{} CSV files compared across 1 and 4 threads, differing: {differing:?}", names.len()),
    ))
}

fn pf(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() {
    // Honour `cargo test -- <filter>` loosely: no filtering, but skip on `--list`.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Check); 11] = [
        ("AC1", algebra_suite),
        ("AC2", free_exactness),
        ("AC3", perturbative_oracle),
        ("AC4", sandwich_bounds),
        ("AC5", soft_absence),
        ("AC6", virial),
        ("AC7", mourre),
        ("AC8", conservation),
        ("AC9", electron_velocity),
        ("AC10", w_behaviour),
        ("AC11", determinism),
    ];
    let mut undocumented = Vec::new();
    for (id, f) in criteria {
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{id:<4} {} {detail} ({:.1} s)", pf(ok), start.elapsed().as_secs_f64());
        if !ok {
            match DOCUMENTED_FAILURES.iter().find(|(d, _)| *d == id) {
                Some((_, why)) => println!("     documented failure: {why}"),
                None => undocumented.push(id),
            }
        }
    }
    if !undocumented.is_empty() {
        eprintln!("undocumented acceptance failures: {undocumented:?}");
        std::process::exit(1);
    }
}
