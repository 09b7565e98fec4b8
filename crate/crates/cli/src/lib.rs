//! Experiment runner: configuration, orchestration, persistence and export.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical abort, 4 invariant
//! violation (including boundary leakage), 1 I/O failure.

pub mod config;
pub mod experiment;
pub mod export;
pub mod store;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Kind, RawConfig};
use store::{experiment_id, RunManifest, MANIFEST};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "supercrit", version, about = "Numerical laboratory for supercritical wave and Schrödinger equations")]
pub struct Cli {
    /// Experiment config file (key = value with [section] headers).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root directory for run directories.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Seed for every pseudo-random draw (decimal or 0x-hex).
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads for ladder members and radii (0: one per task).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Nonlinearity selection, e.g. `defocusing_exp:m=1`.
    #[arg(long)]
    pub nonlinearity: Option<String>,
    /// Overrides any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the declared assumption class and estimate constants.
    CheckAssumptions(RunArgs),
    /// Evolve the wave equation and record conservation diagnostics.
    SimulateWave(RunArgs),
    /// Evolve the Schrödinger equation and record conservation diagnostics.
    SimulateNls(RunArgs),
    /// Compare a reference run against a ladder of approximations.
    WeakStrong(RunArgs),
    /// Run the truncation-ladder construction.
    AppendixConstruct(RunArgs),
    /// Check the virial, expansion and cancellation identities.
    IdentityCheck(RunArgs),
    /// Write a finished run as tidy `series,t,value` CSV.
    Export {
        experiment_id: String,
        /// Output file (default: standard output).
        #[arg(long, value_name = "PATH")]
        to: Option<PathBuf>,
    },
}

impl Command {
    fn kind(&self) -> Option<(Kind, &RunArgs)> {
        match self {
            Command::CheckAssumptions(a) => Some((Kind::CheckAssumptions, a)),
            Command::SimulateWave(a) => Some((Kind::SimulateWave, a)),
            Command::SimulateNls(a) => Some((Kind::SimulateNls, a)),
            Command::WeakStrong(a) => Some((Kind::WeakStrong, a)),
            Command::AppendixConstruct(a) => Some((Kind::AppendixConstruct, a)),
            Command::IdentityCheck(a) => Some((Kind::IdentityCheck, a)),
            Command::Export { .. } => None,
        }
    }
}

/// File < environment < command line.
pub fn load_config(
    cli: &Cli,
    kind: Kind,
    args: &RunArgs,
    env: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                issues: vec![config::ConfigIssue { origin: None, message: format!("cannot read {}: {e}", path.display()) }],
            })?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    raw.apply_env(env.iter().cloned())?;
    raw.set("kind", kind.as_str())?;
    if let Some(n) = &args.nonlinearity {
        raw.set("nonlinearity", n)?;
    }
    if let Some(s) = &cli.seed {
        raw.set("seed", s)?;
    }
    if let Some(o) = &cli.output {
        raw.set("output_dir", &o.display().to_string())?;
    }
    for pair in &args.set {
        raw.set_pair(pair)?;
    }
    config::resolve(&raw)
}

/// Runs a validated config and persists it; returns the manifest and the
/// run directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> std::io::Result<(RunManifest, PathBuf)> {
    let id = experiment_id(cfg);
    let started_at = store::now();
    let payload = experiment::execute(cfg, jobs);
    let mut files = payload.files;
    let manifest = RunManifest {
        experiment_id: id.clone(),
        kind: cfg.kind.as_str().to_string(),
        config: cfg.echo(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: store::now(),
        outcome: payload.outcome,
        message: payload.message,
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    files.push((MANIFEST.to_string(), experiment::json_bytes(&manifest)));
    let dir = store::write_run_dir(&cfg.output_dir, &id, &files)?;
    Ok((manifest, dir))
}

fn output_root(cli: &Cli, env: &[(String, String)]) -> Result<PathBuf, ConfigError> {
    if let Some(o) = &cli.output {
        return Ok(o.clone());
    }
    if let Some((_, v)) = env.iter().find(|(k, _)| k == "SUPERCRIT_OUTPUT_DIR") {
        return Ok(PathBuf::from(v));
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            issues: vec![config::ConfigIssue { origin: None, message: format!("cannot read {}: {e}", path.display()) }],
        })?;
        if let Some(v) = RawConfig::parse(&text)?.get("output_dir") {
            return Ok(PathBuf::from(v));
        }
    }
    Ok(PathBuf::from("runs"))
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_cli<I, T>(args: I, env: &[(String, String)], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    if let Command::Export { experiment_id, to } = &cli.command {
        let root = match output_root(&cli, env) {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(stderr, "config error:\n{e}");
                return EXIT_CONFIG;
            }
        };
        return match export::export_plot_data(&root, experiment_id) {
            Ok(csv) => {
                let written = match to {
                    Some(path) => std::fs::write(path, csv),
                    None => stdout.write_all(csv.as_bytes()),
                };
                match written {
                    Ok(()) => EXIT_OK,
                    Err(e) => {
                        let _ = writeln!(stderr, "error: {e}");
                        EXIT_IO
                    }
                }
            }
            Err(export::ExportError::Io(e)) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_IO
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_CONFIG
            }
        };
    }
    let (kind, args) = cli.command.kind().expect("run subcommand");
    let cfg = match load_config(&cli, kind, args, env) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "config error:\n{e}");
            return EXIT_CONFIG;
        }
    };
    match run_experiment(&cfg, cli.jobs) {
        Ok((manifest, dir)) => {
            let _ = writeln!(stdout, "{} {:?} {}", manifest.experiment_id, manifest.outcome, dir.display());
            if let Some(m) = &manifest.message {
                let _ = writeln!(stderr, "{m}");
            }
            manifest.outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot write run directory: {e}");
            EXIT_IO
        }
    }
}
