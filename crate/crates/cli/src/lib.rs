//! Command-line driver: reads a problem config, runs one computation, prints
//! a short summary and optionally writes a machine-readable report.

pub mod commands;
pub mod config;
pub mod format;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use chainfree::Error;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::{dispatch, Context};
use crate::config::{ConfigError, Mode, ProblemConfig, SCHEMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_COUNTEREXAMPLE: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Validate the family and report sparsity.
    Check,
    /// Longest valid color sequence plus one.
    Lcg,
    /// Critical exponent and its optimal chain profiles.
    OmegaCrit,
    /// Best layered templates for each optimal profile.
    Extremal,
    /// Exact (weighted) number of valid colored subsets.
    Count,
    /// Expected number of valid colored subsets of a random coloring.
    Expect,
    /// Monte Carlo estimate of the same expectation.
    Sample,
    /// Chain statistics and their inequalities on a full band template.
    Supersat,
    /// Codegree-capped hypergraph construction with audits.
    Balanced,
    /// Branching container process.
    Containers,
    /// Coverage audit of a containers report.
    Verify,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "chainfree", version, about = "Colored chain avoidance in the Boolean lattice")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Problem config; `verify` takes a containers report instead.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Rank band as `LO,HI`.
    #[arg(long, value_parser = parse_band)]
    pub band: Option<[u32; 2]>,
    /// Cap on worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, conflicts_with = "sample")]
    pub exact: bool,
    #[arg(long)]
    pub sample: bool,
    /// Write the codegree table of `balanced` as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_band(s: &str) -> Result<[u32; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo = lo.trim().parse::<u32>().map_err(|e| format!("LO: {e}"))?;
    let hi = hi.trim().parse::<u32>().map_err(|e| format!("HI: {e}"))?;
    Ok([lo, hi])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub config: ProblemConfig,
    pub result: Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } | Error::StateSpace { .. } => EXIT_BUDGET,
        Error::Counterexample(_) => EXIT_COUNTEREXAMPLE,
        _ => EXIT_PRECONDITION,
    }
}

impl Cli {
    fn apply(&self, cfg: &mut ProblemConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = Some(v); } )* };
        }
        set!(seed, n, alpha, delta, tau, samples, band);
        if self.exact {
            cfg.mode = Some(Mode::Exact);
        }
        if self.sample {
            cfg.mode = Some(Mode::Sample);
        }
    }
}

/// Loads the config (or, for `verify`, the report it names), applies flag
/// overrides and returns it with the report's `result` when one was read.
fn load(cli: &Cli) -> Result<(ProblemConfig, Option<Value>), ConfigError> {
    if cli.command != Command::Verify {
        let mut cfg = ProblemConfig::load(&cli.config)?;
        cli.apply(&mut cfg);
        cfg.validate()?;
        return Ok((cfg, None));
    }
    let origin = cli.config.display().to_string();
    let text = config::read(&cli.config)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let report: Report = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Malformed {
        path: origin.clone(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if report.command != Command::Containers.name() {
        return Err(ConfigError::Invalid(format!(
            "{origin}: command: verify needs a containers report, found \"{}\"",
            report.command
        )));
    }
    let mut cfg = report.config;
    cfg.validate()?;
    cli.apply(&mut cfg);
    Ok((cfg, Some(report.result)))
}

/// Runs one command, writing the summary to `out` and diagnostics to `err`.
/// Returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (cfg, input) = match load(cli) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_PRECONDITION;
        }
    };
    let outcome = || -> Result<commands::Outcome, Error> {
        let ctx = Context {
            cfg: &cfg,
            family: cfg.family().map_err(|e| Error::Parameter(e.to_string()))?,
            beta: cfg.weights().map_err(|e| Error::Parameter(e.to_string()))?,
            csv: cli.csv.as_deref(),
            input: input.as_ref(),
        };
        dispatch(cli.command, &ctx)
    };
    let outcome = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(outcome),
            Err(e) => {
                let _ = writeln!(err, "error: cannot start {t} threads: {e}");
                return EXIT_PRECONDITION;
            }
        },
        None => outcome(),
    };
    let (result, code) = match outcome {
        Ok(o) => {
            let _ = out.write_all(o.summary.as_bytes());
            if o.exit == EXIT_COUNTEREXAMPLE {
                let _ = writeln!(err, "counterexample: see report");
            }
            (o.result, o.exit)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            (serde_json::json!({ "error": e.to_string() }), exit_code(&e))
        }
    };
    if let Some(path) = &cli.out {
        let report = Report { schema: SCHEMA.into(), command: cli.command.name(), config: cfg, result };
        if let Err(e) = fs::write(path, report.to_json()) {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return code.max(EXIT_PRECONDITION);
        }
    }
    code
}
