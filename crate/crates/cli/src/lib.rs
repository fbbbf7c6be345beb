//! Batch front end for `bwl-core`: one subcommand per analysis, JSON or CSV reports.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod inputs;
pub mod report;

use config::{FileConfig, Format, RunConfig};
use report::Report;

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// A verification subcommand found a violated invariant.
pub const EXIT_VIOLATION: i32 = 1;
/// Bad flags, config or inputs.
pub const EXIT_INVALID: i32 = 2;

/// The schema every JSON report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] bwl_core::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bwl", version, about = "Weighted inequalities for Bessel-type measures on the half line")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file with any of: L, res, p, lambda, alpha, kind, c, alphas, seed, format
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Window exponent: the grid covers (2^-L, 2^L]
    #[arg(long = "L", global = true)]
    pub l: Option<u32>,
    /// Cells per octave are 2^res
    #[arg(long, global = true)]
    pub res: Option<u32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Power-weight exponent: w = t^alpha
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// ap, apl or apt, optionally with -local:K
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Constant in the reverse-Hölder exponent ε = 1/(c·[w])
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Exponent grid lo:hi:step
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            l: self.l,
            res: self.res,
            p: self.p,
            lambda: self.lambda,
            alpha: self.alpha,
            kind: self.kind.clone(),
            c: self.c,
            alphas: self.alphas.clone(),
            seed: self.seed,
            format: self.format,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class constant of a power or tabulated weight
    WeightConstant(commands::WeightConstantArgs),
    /// Exact membership and numerical constants over an exponent grid
    PowerScan,
    /// λ-maximal function on the grid
    Maximal(commands::MaximalArgs),
    /// Calderón–Zygmund decomposition with invariant checks
    Cz(commands::CzArgs),
    /// BMO norms under both measures
    Bmo(commands::BmoArgs),
    /// John–Nirenberg distribution profile
    Jn(commands::JnArgs),
    /// Reverse-Hölder sweep with ε from the class constant
    Reverse(commands::ReverseArgs),
    /// Smallest exponent keeping a power weight in the tilde class
    Openness(commands::OpennessArgs),
    /// Commutator by contour integral against the direct formula
    Commutator(commands::CommutatorArgs),
    /// The t^-2 / t^5 pair that separates the two classes
    SeparationDemo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::WeightConstant(_) => "weight-constant",
            Command::PowerScan => "power-scan",
            Command::Maximal(_) => "maximal",
            Command::Cz(_) => "cz",
            Command::Bmo(_) => "bmo",
            Command::Jn(_) => "jn",
            Command::Reverse(_) => "reverse",
            Command::Openness(_) => "openness",
            Command::Commutator(_) => "commutator",
            Command::SeparationDemo => "separation-demo",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::PowerScan => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Result of one invocation: what to write, where, and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Vec<u8>,
    pub out: Option<PathBuf>,
    pub message: Option<String>,
}

impl Outcome {
    fn invalid(message: String) -> Self {
        Outcome { exit_code: EXIT_INVALID, report: Vec::new(), out: None, message: Some(message) }
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome { exit_code: code, report: text.into_bytes(), out: None, message: None }
            } else {
                Outcome::invalid(text)
            };
        }
    };
    match execute(&cli) {
        Ok((report, violated)) => Outcome {
            exit_code: if violated { EXIT_VIOLATION } else { EXIT_OK },
            report,
            out: cli.common.out.clone(),
            message: violated.then(|| format!("{}: invariant violated", cli.command.name())),
        },
        Err(e) => Outcome::invalid(format!("error: {e}")),
    }
}

fn execute(cli: &Cli) -> Result<(Vec<u8>, bool), CliError> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(file.overlay(cli.common.as_file_config()), cli.command.default_format())?;
    let output = commands::dispatch(&cli.command, &cfg)?;
    let violated = !output.violations.is_empty();
    let report = Report::new(cli.command.name(), &cfg, output);
    Ok((report.render(cfg.format)?, violated))
}
