//! Command-line driver: loads an experiment config, runs the requested
//! steps and writes reports into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{load_config, Mode};
use error::{CliError, EXIT_CERTIFICATE, EXIT_PASS, EXIT_USAGE};
use output::OutputDir;
use pipeline::Run;

pub const SCHEMA_VERSION: &str = "1";
pub const THREADS_VAR: &str = "LATTICE_WAVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lattice-wave", version, about = "Traveling waves of a lattice SIR model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical speed, double root and the decay rates at the chosen speed.
    Dispersion(Common),
    /// Certify the upper and lower envelopes on a dense grid.
    VerifyBounds(Common),
    /// Solve for the wave profile and run its diagnostics.
    Profile(Common),
    /// Profile plus the Lyapunov functional trace.
    Lyapunov(Common),
    /// Simulate the lattice and fit the front speed.
    Simulate(Common),
    /// Subcritical probe: Δ > 0 and a front that outruns the test speed.
    ProbeNonexistence(Common),
    /// Dispersion, envelopes, profile, Lyapunov and lattice in one run.
    FullPipeline(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, replacing `output_dir` from the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dot-path override into the config, e.g. numerics.lattice.ni=200.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Command {
    fn split(&self) -> (Mode, &Common) {
        match self {
            Command::Dispersion(c) => (Mode::Dispersion, c),
            Command::VerifyBounds(c) => (Mode::VerifyBounds, c),
            Command::Profile(c) => (Mode::Profile, c),
            Command::Lyapunov(c) => (Mode::Lyapunov, c),
            Command::Simulate(c) => (Mode::Simulate, c),
            Command::ProbeNonexistence(c) => (Mode::ProbeNonexistence, c),
            Command::FullPipeline(c) => (Mode::FullPipeline, c),
        }
    }
}

/// Caps the rayon pool from LATTICE_WAVE_THREADS. A pool that already exists
/// is left alone.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Threads(raw.clone()))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the experiment and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (mode, common) = cli.command.split();
    match prepare(mode, common) {
        Ok((cfg, out)) => execute(mode, &cfg, out),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn prepare(mode: Mode, common: &Common) -> Result<(config::ExperimentConfig, OutputDir), CliError> {
    configure_threads()?;
    let mut cfg = load_config(common.config.as_deref(), &common.overrides)?;
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    cfg.validate(mode)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    Ok((cfg, out))
}

fn execute(mode: Mode, cfg: &config::ExperimentConfig, out: OutputDir) -> i32 {
    let mut run = Run::new(cfg, out);
    let outcome = run.execute(mode);
    let first_failure = run.certificates.iter().find(|c| !c.pass).map(|c| c.name.clone());
    let (code, status, error) = match &outcome {
        Err(e) => (e.exit_code(), "error", Some(e.to_string())),
        Ok(()) if first_failure.is_some() => (EXIT_CERTIFICATE, "fail", None),
        Ok(()) => (EXIT_PASS, "pass", None),
    };
    for c in &run.certificates {
        println!(
            "{} {} margin={:e} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.margin,
            c.detail
        );
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "status": status,
        "exit_code": code,
        "error": error,
        "first_failure": first_failure,
        "certificates": run.certificates,
        "results": run.results,
        "files": run.out.files(),
        "config": cfg,
    });
    if let Err(e) = run.out.write_json("summary.json", &summary) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    } else if let Some(name) = &first_failure {
        eprintln!("certificate failed: {name}");
    }
    code
}
