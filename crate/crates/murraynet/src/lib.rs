//! Batch front end for `murraynet-core`: config and file formats, the
//! `murraynet` command line, and the run manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod selftest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

pub use commands::Artifacts;
pub use config::RunConfig;
pub use error::{CliError, Result};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "murraynet",
    version,
    about = "Energy-optimal transport networks and Murray-law checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "murraynet-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Kirchhoff pressures and fluxes for a network.
    Solve { input: Option<PathBuf> },
    /// Descend the energy over conductivities.
    Optimize { input: Option<PathBuf> },
    /// Node-wise Murray-law report for a network.
    CheckMurray { input: Option<PathBuf> },
    /// Continuum model pressure, conductivity and flux.
    SolveContinuum,
    /// Continuum flux balance over `continuum.subdomain`.
    CheckContinuumMurray,
    /// Vector model pressure and `m`.
    SolvePhenom,
    /// Vector model flux balance over `continuum.subdomain`.
    CheckPhenomMurray,
    /// Built-in invariant checks.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Optimize { .. } => "optimize",
            Command::CheckMurray { .. } => "check-murray",
            Command::SolveContinuum => "solve-continuum",
            Command::CheckContinuumMurray => "check-continuum-murray",
            Command::SolvePhenom => "solve-phenom",
            Command::CheckPhenomMurray => "check-phenom-murray",
            Command::Selftest => "selftest",
        }
    }
}

/// Outcome of a run that produced files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<String>,
    pub lines: Vec<String>,
    /// False when a self-test check failed.
    pub passed: bool,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

/// Thread count from `MURRAYNET_THREADS`; 0 or unset means automatic.
pub fn thread_count() -> Result<usize> {
    match std::env::var("MURRAYNET_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("MURRAYNET_THREADS={v:?} is not a count"))),
    }
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<(Artifacts, serde_json::Value)> {
    let d = &cfg.discrete;
    let c = &cfg.continuum;
    let params = |v: serde_json::Value| v;
    Ok(match &cli.command {
        Command::Solve { input } => (commands::solve(input.as_deref(), d)?, params(json!(d))),
        Command::Optimize { input } => (commands::optimize(input.as_deref(), d)?, params(json!(d))),
        Command::CheckMurray { input } => (
            commands::check_murray(input.as_deref(), d)?,
            params(json!(d)),
        ),
        Command::SolveContinuum => (commands::solve_continuum(c)?, json!(c)),
        Command::CheckContinuumMurray => (commands::check_continuum_murray(c)?, json!(c)),
        Command::SolvePhenom => (commands::solve_phenom(c)?, json!(c)),
        Command::CheckPhenomMurray => (commands::check_phenom_murray(c)?, json!(c)),
        Command::Selftest => {
            let checks = selftest::run(cli.seed);
            let failed = checks.iter().any(|c| !c.passed);
            let lines = checks
                .iter()
                .map(|c| {
                    let verdict = if c.passed { "PASS" } else { "FAIL" };
                    format!(
                        "{verdict} {} = {} ({} {})",
                        c.name,
                        formats::num(c.value),
                        c.relation,
                        formats::num(c.threshold)
                    )
                })
                .collect();
            let report = json!({ "seed": cli.seed, "checks": checks, "passed": !failed });
            let mut a = Artifacts {
                report: report.clone(),
                lines,
                failed,
                ..Default::default()
            };
            a.files
                .push(("selftest.json".into(), formats::pretty(&report)));
            (a, json!({}))
        }
    })
}

/// Runs one command and writes its files, `report.json` and
/// `run_manifest.json` into the output directory.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let (mut art, parameters) = pool.install(|| dispatch(cli, &cfg))?;

    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    art.files
        .push(("report.json".into(), formats::pretty(&art.report)));
    let mut outputs = Vec::new();
    for (name, contents) in &art.files {
        let path = cli.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        outputs.push(name.clone());
    }
    outputs.push("run_manifest.json".into());

    let mut inputs = Vec::new();
    if let Some(p) = &cli.config {
        inputs.push(p.clone());
    }
    inputs.extend(art.inputs.iter().cloned());
    let inputs = inputs
        .iter()
        .map(|p| Ok(json!({ "path": p.display().to_string(), "sha256": sha256_file(p)? })))
        .collect::<Result<Vec<_>>>()?;
    let manifest = json!({
        "tool": "murraynet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "seed": cli.seed,
        "parameters": parameters,
        "inputs": inputs,
        "outputs": outputs,
    });
    let path = cli.out.join("run_manifest.json");
    std::fs::write(&path, formats::pretty(&manifest)).map_err(|e| CliError::io(&path, e))?;
    Ok(RunSummary {
        outputs,
        lines: art.lines,
        passed: !art.failed,
    })
}
