//! `opconc`: evaluate intrinsic-dimension tail bounds, invert them into
//! confidence radii, and run the verification suites from JSON configs.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! configuration error (reported as JSON on stderr).

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opconc::verify::Suite;
use opconc::NumericPolicy;
use serde::Serialize;

use crate::commands::{Check, Output};
use crate::config::RunConfig;

const POLICY_ENV: &str = "OPCONC_NUMERIC_POLICY";

#[derive(Debug, Parser)]
#[command(name = "opconc", version, about = "Intrinsic-dimension matrix concentration bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV tables and summary.json; tables go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for simulation (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run a single verification suite (phi_exp, g_exp, g_phi, h_bound, trace).
    #[arg(long, global = true)]
    suite: Option<String>,
    /// Upper limit on Monte Carlo trials per check.
    #[arg(long, global = true)]
    max_trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Evaluate tail bounds over a grid of radii.
    Bound,
    /// Confidence radii for the empirical mean.
    Invert,
    /// Monte Carlo tails and (super/sub)martingale and coverage checks.
    Simulate,
    /// Exact tails of a Rademacher series against bounds.
    Enumerate,
    /// Deterministic inequality suites.
    Verify,
    /// Constant, ambient-dimension and martingale comparisons.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Invert => "invert",
            Command::Simulate => "simulate",
            Command::Enumerate => "enumerate",
            Command::Verify => "verify",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Config { kind: String, message: String },
}

impl CliError {
    pub fn config(kind: &str, message: String) -> Self {
        CliError::Config { kind: kind.into(), message }
    }
}

impl From<opconc::Error> for CliError {
    fn from(e: opconc::Error) -> Self {
        CliError::Config { kind: e.code().into(), message: e.to_string() }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    pass: bool,
    checks: &'a [Check],
}

fn missing(command: Command) -> CliError {
    CliError::config("schema", format!("config has no \"{}\" section", command.name()))
}

fn install_policy(from_config: Option<NumericPolicy>) -> Result<(), CliError> {
    let policy = match (from_config, std::env::var_os(POLICY_ENV)) {
        (Some(p), _) => p,
        (None, Some(path)) => {
            let path = PathBuf::from(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config("io", format!("{POLICY_ENV}: cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config("schema", format!("{POLICY_ENV}: {e}")))?
        }
        (None, None) => return Ok(()),
    };
    policy.validate()?;
    policy.install().map_err(|_| CliError::config("internal", "numeric policy already fixed".into()))
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if matches!(cli.command, Command::Verify | Command::Compare) => RunConfig::default(),
        None => return Err(CliError::config("usage", format!("{} requires --config", cli.command.name()))),
    };
    install_policy(config.numeric_policy)?;
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config("usage", format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Bound => commands::bound(config.bound.as_ref().ok_or_else(|| missing(cli.command))?),
        Command::Invert => commands::invert(config.invert.as_ref().ok_or_else(|| missing(cli.command))?),
        Command::Simulate => {
            commands::simulate(config.simulate.as_ref().ok_or_else(|| missing(cli.command))?, cli.max_trials)
        }
        Command::Enumerate => commands::enumerate(config.enumerate.as_ref().ok_or_else(|| missing(cli.command))?),
        Command::Verify => {
            let suites = match &cli.suite {
                Some(name) => vec![name.parse::<Suite>()?],
                None => Suite::ALL.to_vec(),
            };
            commands::verify(&config.verify.unwrap_or_default(), &suites)
        }
        Command::Compare => commands::compare(&config.compare.unwrap_or_default()),
    }
}

fn emit(command: Command, out: &Output, dir: Option<&Path>) -> std::io::Result<()> {
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    let csv_error = |e: opconc::Error| std::io::Error::other(e.to_string());
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, table) in &out.tables {
                std::fs::write(dir.join(format!("{name}.csv")), table.to_csv_string().map_err(csv_error)?)?;
            }
            let summary = Summary { command: command.name(), pass: out.pass(), checks: &out.checks };
            let mut json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
            json.push('\n');
            std::fs::write(dir.join("summary.json"), json)?;
        }
        None => {
            for (name, table) in &out.tables {
                writeln!(stdout, "# {name}.csv")?;
                stdout.write_all(table.to_csv_string().map_err(csv_error)?.as_bytes())?;
            }
        }
    }
    for check in &out.checks {
        writeln!(stdout, "{} {}: {}", if check.pass { "PASS" } else { "FAIL" }, check.name, check.detail)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        emit(cli.command, &out, cli.out.as_deref()).map_err(|e| CliError::config("io", e.to_string()))?;
        Ok(out)
    });
    match result {
        Ok(out) if out.pass() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(CliError::Config { kind, message }) => {
            let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
