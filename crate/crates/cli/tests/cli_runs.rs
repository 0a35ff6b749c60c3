//! End-to-end runs of the `nelsonlab` binary on small configurations.

use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

use nelsonlab_cli::config::RunConfig;

const SMALL: &[&str] = &[
    "grid.modes=8",
    "basis.n_max=2",
    "dispersion.points=5",
    "mourre.samples=16",
    "mourre.couplings=0,0.02",
    "dynamics.t_end=10",
];

fn run(dir: &Path, cmd: &str, sets: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nelsonlab"));
    c.arg(cmd).arg("--out").arg(dir);
    for s in SMALL.iter().chain(sets) {
        c.args(["--set", s]);
    }
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path, cmd: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{cmd}.json"))).unwrap()).unwrap()
}

fn verdict_passed(m: &Value, name: &str) -> bool {
    m["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["name"] == name)
        .unwrap_or_else(|| panic!("no verdict {name}"))["passed"]
        .as_bool()
        .unwrap()
}

#[test]
fn algebra_passes_and_a_fault_names_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "algebra", &[]).status.code(), Some(0));
    let o = run(dir.path(), "algebra", &["algebra.fault=creation_entry"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL") && l.contains("ccr")));
}

#[test]
fn empty_guarded_sector_is_reported_as_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "algebra", &["algebra.n_max=0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("vacuous"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "algebra", &["no.such_key=1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), "algebra", &["grid.modes=abc"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_nelsonlab"))
        .args(["algebra", "--config"])
        .arg(dir.path().join("missing.ini"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stalled_krylov_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "evolve", &["dynamics.krylov_dim=2", "dynamics.step_tol=1e-300"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_coupling_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["dispersion", "mourre", "evolve"] {
        let o = run(dir.path(), cmd, &["model.coupling=0", "dispersion.pt_couplings=0.01,0.02"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stdout(&o));
    }
    assert!(verdict_passed(&manifest(dir.path(), "dispersion"), "free_exactness"));
    assert!(verdict_passed(&manifest(dir.path(), "mourre"), "positivity_at_zero_coupling"));
    assert!(verdict_passed(&manifest(dir.path(), "evolve"), "phase_exactness"));
}

#[test]
fn dressed_state_has_no_asymptotic_boson() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "w", &["w.state=dressed"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let m = manifest(dir.path(), "w");
    assert!(m["results"]["final_w"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn csv_rows_carry_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "dispersion", &[]).status.code(), Some(0));
    let m = manifest(dir.path(), "dispersion");
    let hash = m["config_hash"].as_str().unwrap();
    for f in m["files"].as_array().unwrap() {
        let text = std::fs::read_to_string(dir.path().join(f.as_str().unwrap())).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().ends_with(",config_hash"));
        for l in lines {
            assert!(l.ends_with(hash), "{l}");
        }
    }
}

#[test]
fn sectioned_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ini");
    std::fs::write(&path, "seed = 3\n[grid]\nmodes = 8 # small\n; comment\n[basis]\nn_max = 2\n").unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.usize("grid.modes"), 8);
    assert_eq!(cfg.u64("seed"), 3);

    let o = Command::new(env!("CARGO_BIN_EXE_nelsonlab"))
        .args(["dispersion", "--config"])
        .arg(&path)
        .args(["--set", "dispersion.points=3", "--seed", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(dir.path(), "dispersion");
    assert_eq!(m["config"]["seed"], "9");
    assert_eq!(m["config"]["grid.modes"], "8");
    assert_eq!(m["config"]["dispersion.points"], "3");
}

#[test]
fn report_summarizes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "algebra", &[]).status.code(), Some(0));
    let o = run(dir.path(), "report", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, t) in [(&a, "1"), (&b, "3")] {
        for cmd in ["dispersion", "mourre"] {
            assert_eq!(run(dir.path(), cmd, &[&format!("threads={t}")]).status.code(), Some(0));
        }
    }
    for name in ["dispersion_curve.csv", "mourre_sweep.csv", "mourre_samples.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The canonical text of any valid configuration parses back to the same configuration.
    #[test]
    fn canonical_text_roundtrips(
        modes in 1usize..40,
        coupling in -1.0f64..1.0,
        n_max in 0usize..6,
        cap in prop::option::of(0.1f64..10.0),
        relativistic in any::<bool>(),
        couplings in prop::collection::vec(0.0f64..0.1, 1..5),
    ) {
        let mut cfg = RunConfig::default();
        cfg.set("grid.modes", &(2 * modes).to_string()).unwrap();
        cfg.set("model.coupling", &coupling.to_string()).unwrap();
        cfg.set("basis.n_max", &n_max.to_string()).unwrap();
        cfg.set("basis.energy_cap", &cap.map_or("none".to_string(), |c| c.to_string())).unwrap();
        cfg.set("model.dispersion", if relativistic { "relativistic" } else { "nonrelativistic" }).unwrap();
        let list: Vec<String> = couplings.iter().map(|c| c.to_string()).collect();
        cfg.set("mourre.couplings", &list.join(",")).unwrap();
        let back = RunConfig::parse(&cfg.canonical()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }
}
