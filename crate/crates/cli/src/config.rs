//! Flat `key = value` run configuration checked against a fixed schema.
//!
//! Lines may be grouped under `[section]` headers; a key `k` inside
//! `[model]` is the same as `model.k` at top level. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    /// Float or `none`.
    OptFloat,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    /// Comma-separated floats, possibly empty.
    FloatList,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn spec(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, kind, default, help }
}

use Kind::*;

pub const SCHEMA: &[KeySpec] = &[
    spec("seed", Int, "7", "seed for every random draw"),
    spec("threads", Int, "0", "worker threads, 0 = NELSONLAB_THREADS or all cores"),
    spec("model.dispersion", Choice(&["nonrelativistic", "relativistic"]), "nonrelativistic", "electron dispersion"),
    spec("model.mass", Float, "1", "electron mass"),
    spec("model.coupling", Float, "0.05", "coupling g"),
    spec("model.modified_dispersion", Bool, "true", "use the modified boson dispersion"),
    spec("model.total_momentum", Float, "0", "total momentum P along the first axis"),
    spec("ff.kappa0", Float, "1", "form factor amplitude"),
    spec("ff.lambda", Float, "1.5", "ultraviolet cutoff"),
    spec("ff.sigma", Float, "0.2", "infrared cutoff"),
    spec("grid.kind", Choice(&["line", "lattice", "radial"]), "line", "boson mode grid"),
    spec("grid.modes", Int, "16", "line grid: number of modes"),
    spec("grid.kmax", Float, "2", "largest |k| on the grid"),
    spec("grid.sites", Int, "128", "lattice grid: chain length"),
    spec("grid.spacing", Float, "1", "lattice grid: lattice constant"),
    spec("grid.shells", Int, "10", "radial grid: radial nodes"),
    spec("grid.directions", Int, "6", "radial grid: directions per shell"),
    spec("basis.n_max", Int, "3", "boson number cap"),
    spec("basis.energy_cap", OptFloat, "none", "free-energy cap on basis states"),
    spec("solver.tol", Float, "1e-10", "eigen residual tolerance"),
    spec("solver.krylov_dim", Int, "160", "Lanczos vectors per restart"),
    spec("solver.max_restarts", Int, "60", "Lanczos restarts"),
    spec("algebra.modes", Int, "4", "modes of the identity-suite grid"),
    spec("algebra.n_max", Int, "3", "cap of the identity-suite basis"),
    spec("algebra.kmax", Float, "2", "largest |k| of the identity-suite grid"),
    spec("algebra.draws", Int, "100", "random operators per identity"),
    spec("algebra.tol", Float, "1e-12", "identity tolerance"),
    spec("algebra.fault", Choice(&["none", "creation_entry"]), "none", "deliberately corrupt an operator"),
    spec("dispersion.p_min", Float, "-1", "first scan momentum"),
    spec("dispersion.p_max", Float, "1", "last scan momentum"),
    spec("dispersion.points", Int, "21", "scan points"),
    spec("dispersion.beta", Float, "0.5", "velocity bound defining O_beta and g_beta"),
    spec("dispersion.pt_couplings", FloatList, "0.01,0.02,0.04,0.08", "couplings of the perturbative fit"),
    spec("mourre.window", Float, "1", "upper edge of the spectral window"),
    spec("mourre.samples", Int, "64", "random vectors per coupling"),
    spec("mourre.couplings", FloatList, "0,0.01,0.02,0.04,0.08", "coupling sweep"),
    spec("mourre.sector", Choice(&["full", "soft_free"]), "full", "subspace holding the window"),
    spec("mourre.compare_half_sigma", Bool, "false", "repeat the sweep at sigma/2"),
    spec("dynamics.target", Choice(&["fiber", "full"]), "fiber", "fiber Hamiltonian or electron chain"),
    spec("dynamics.t0", Float, "1", "first sample time"),
    spec("dynamics.ratio", Float, "1.5", "geometric time ratio"),
    spec("dynamics.t_end", Float, "100", "last sample time"),
    spec("dynamics.krylov_dim", Int, "30", "Lanczos vectors per time step"),
    spec("dynamics.step_tol", Float, "1e-12", "accepted error per time step"),
    spec("dynamics.max_step", Float, "5", "largest time step"),
    spec("dynamics.packet_pmax", Float, "0.3", "full model: momentum support of the dressed packet"),
    spec("packet.k0", Float, "0.6", "one-boson packet: mean momentum"),
    spec("packet.width", Float, "0.15", "one-boson packet: momentum width"),
    spec("packet.x0", Float, "0", "one-boson packet: mean position"),
    spec("cutoff.beta", Float, "0.2", "velocity bound beta"),
    spec("cutoff.beta0", Float, "0.22", "threshold beta0"),
    spec("cutoff.beta1", Float, "0.25", "threshold beta1"),
    spec("cutoff.beta2", Float, "0.3", "threshold beta2"),
    spec("cutoff.beta3", Float, "0.35", "threshold beta3"),
    spec("cutoff.gamma", Float, "0.4", "counter radius gamma"),
    spec("w.state", Choice(&["dressed", "boson", "excited"]), "dressed", "initial state of the W runs"),
    spec("w.filter_lo", OptFloat, "none", "energy window: 1 below"),
    spec("w.filter_hi", OptFloat, "none", "energy window: 0 above"),
    spec("wplus.n_joint", Int, "2", "cap of the two-factor space"),
    spec("wplus.jinf_zero", Bool, "false", "replace j_inf by 0"),
];

pub fn lookup(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

/// Keys that do not change any computed number and stay out of the hash.
const UNHASHED: &[&str] = &["threads"];

fn check_value(spec: &KeySpec, raw: &str) -> Result<(), ConfigError> {
    let bad = |msg: String| ConfigError::Value {
        key: spec.key.to_string(),
        msg,
    };
    let float = |s: &str| -> Result<f64, ConfigError> {
        let v: f64 = s.trim().parse().map_err(|_| bad(format!("`{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad(format!("`{s}` is not finite")))
        }
    };
    match spec.kind {
        Float => float(raw).map(|_| ()),
        OptFloat if raw == "none" => Ok(()),
        OptFloat => float(raw).map(|_| ()),
        Int => raw
            .parse::<u64>()
            .map(|_| ())
            .map_err(|_| bad(format!("`{raw}` is not a non-negative integer"))),
        Bool => match raw {
            "true" | "false" => Ok(()),
            _ => Err(bad(format!("`{raw}` is not true/false"))),
        },
        Choice(opts) => {
            if opts.contains(&raw) {
                Ok(())
            } else {
                Err(bad(format!("`{raw}` is not one of {}", opts.join(", "))))
            }
        }
        FloatList => {
            if !raw.trim().is_empty() {
                for part in raw.split(',') {
                    float(part)?;
                }
            }
            Ok(())
        }
    }
}

/// Validated configuration: every schema key with its raw value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: SCHEMA.iter().map(|s| (s.key, s.default.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut section = String::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: n + 1,
                    msg: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let k = k.trim();
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Duplicate(key));
            }
            cfg.set(&key, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let spec = lookup(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        check_value(spec, value)?;
        self.values.insert(spec.key, value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a schema key"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).trim().parse().expect("validated on insert")
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        match self.raw(key) {
            "none" => None,
            s => Some(s.trim().parse().expect("validated on insert")),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated on insert")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on insert")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.raw(key) == "true"
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        let raw = self.raw(key);
        if raw.trim().is_empty() {
            return Vec::new();
        }
        raw.split(',').map(|s| s.trim().parse().expect("validated on insert")).collect()
    }

    /// All keys in schema order of their names (sorted).
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }

    /// Canonical text: one `key = value` line per key, sorted.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of the canonical text, without keys that leave results unchanged.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().filter(|(k, _)| !UNHASHED.contains(k)) {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_their_own_schema() {
        for s in SCHEMA {
            check_value(s, s.default).unwrap();
        }
    }

    #[test]
    fn sections_prefix_keys() {
        let cfg = RunConfig::parse("seed = 3\n[model]\ncoupling = 0.1 # comment\n").unwrap();
        assert_eq!(cfg.u64("seed"), 3);
        assert_eq!(cfg.f64("model.coupling"), 0.1);
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        assert!(matches!(RunConfig::parse("model.coupled = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(
            RunConfig::parse("seed = 1\nseed = 2"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(
            RunConfig::parse("grid.kind = torus"),
            Err(ConfigError::Value { .. })
        ));
    }

    #[test]
    fn hash_ignores_threads_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.set("threads", "3").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "8").unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
