//! Command-line driver: configuration, subcommands and artifact files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nelsonlab", about = "Numerical laboratory for a translation-invariant electron-boson model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (flat `key = value`, optional `[section]` headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Operator identities on guarded sectors.
    Algebra,
    /// Dispersion scan, bound checks and the perturbative fit.
    Dispersion,
    /// Mourre form sweep and virial check.
    Mourre,
    /// Time evolution with conservation checks.
    Evolve,
    /// Asymptotic boson counter `w(t)`.
    W,
    /// Two-factor counter `W_+`.
    Wplus,
    /// Summary of the manifests in the output directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Algebra => "algebra",
            Command::Dispersion => "dispersion",
            Command::Mourre => "mourre",
            Command::Evolve => "evolve",
            Command::W => "w",
            Command::Wplus => "wplus",
            Command::Report => "report",
        }
    }
}

/// Resolves the configuration: file, then `--set`, then `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| config::ConfigError::Syntax {
            line: 0,
            msg: format!("--set expects KEY=VALUE, got `{kv}`"),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(t) = cli.threads {
        cfg.set("threads", &t.to_string())?;
    }
    Ok(cfg)
}

/// Worker count: `--threads` or the config key, else `NELSONLAB_THREADS`, else 0 (all cores).
pub fn thread_count(cfg: &RunConfig) -> Result<usize, CliError> {
    let n = cfg.usize("threads");
    if n > 0 {
        return Ok(n);
    }
    match std::env::var("NELSONLAB_THREADS") {
        Ok(s) => s.trim().parse().map_err(|_| {
            config::ConfigError::Value {
                key: "NELSONLAB_THREADS".into(),
                msg: format!("`{s}` is not a non-negative integer"),
            }
            .into()
        }),
        Err(_) => Ok(0),
    }
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> commands::CmdResult {
    match cli.command {
        Command::Algebra => commands::cmd_algebra(cfg),
        Command::Dispersion => commands::cmd_dispersion(cfg),
        Command::Mourre => commands::cmd_mourre(cfg),
        Command::Evolve => commands::cmd_evolve(cfg),
        Command::W => commands::cmd_w(cfg),
        Command::Wplus => commands::cmd_wplus(cfg),
        Command::Report => commands::cmd_report(&cli.out),
    }
}

/// Runs one subcommand and returns the process exit code:
/// 0 pass, 1 verdict failure, 2 configuration error, 3 non-convergence.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32, CliError> {
    let cfg = resolve_config(cli)?;
    let threads = thread_count(&cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config::ConfigError::Io(e.to_string()))?;
    let outcome = pool.install(|| dispatch(cli, &cfg))?;
    let files = output::write_outcome(&cli.out, cli.command.name(), &cfg, pool.current_num_threads(), &outcome)?;
    for v in &outcome.verdicts {
        println!("{} {:<36} {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    for (k, v) in outcome.results.iter().filter(|(k, _)| k.ends_with("note")) {
        println!("note {k}: {}", v.as_str().unwrap_or_default());
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(if outcome.passed() { 0 } else { 1 })
}
