//! `gup`: command-line front end for gupphase.
//!
//! Exit codes: 0 success, 1 a check failed or the numerics broke down,
//! 2 usage / schema / parse error, 3 model outside the scope of the command.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod model;

pub use model::{load, Loaded, ModelFile};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Overrides `--seed` when set.
pub const SEED_ENV: &str = "GUP_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCOPE: i32 = 3;

/// An error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Failure { code: EXIT_FAIL, message: message.into() }
    }

    pub fn usage_from(e: gupphase::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<gupphase::Error> for Failure {
    fn from(e: gupphase::Error) -> Self {
        use gupphase::Error as E;
        let code = match &e {
            E::Parse(_) | E::Model(_) | E::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_FAIL,
        };
        Failure { code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gup", version, about = "Consistency checks and dynamics for deformed (GUP) phase spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Nondegeneracy, closure, Jacobi and (with a scheme) angular checks.
    Check(CheckArgs),
    /// Reconstruct f from g, from a 2D polynomial l, from a model, or radially from a(rho).
    SolveF(SolveFArgs),
    /// a(rho) = -f f'/rho for a radial f(rho).
    SolveA(SolveAArgs),
    /// Integrate the Hamiltonian flow.
    Simulate(SimulateArgs),
    /// Operator Jacobi identities in normal-ordered form.
    #[command(alias = "quantum-jacobi")]
    Quantum(QuantumArgs),
    /// Rotation generators of a Maggiore-scheme model.
    AngularCheck(AngularArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = gupphase::sampling::DEFAULT_POINTS)]
    pub points: usize,
    #[arg(long, default_value_t = gupphase::sampling::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = gupphase::closure::TOLERANCE)]
    pub tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveFArgs {
    /// Model whose L supplies g.
    pub model: Option<PathBuf>,
    /// Comma-separated components g_1,...,g_d.
    #[arg(long, conflicts_with_all = ["l", "a", "model"], allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Two-dimensional polynomial l = L_12.
    #[arg(long, conflicts_with_all = ["a", "model"], allow_hyphen_values = true)]
    pub l: Option<String>,
    /// Radial a(rho).
    #[arg(long, conflicts_with = "model", allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Parameter binding name=value (repeatable).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Integration constant; may be a symbol for closed forms.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub c: String,
    /// Comma-separated momentum target p_1,...,p_d.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    #[arg(long)]
    pub target_rho: Option<f64>,
    #[arg(long)]
    pub closed_form: bool,
    /// axis | reversed | straight
    #[arg(long, default_value = "axis")]
    pub path: String,
}

#[derive(Args, Debug)]
pub struct SolveAArgs {
    /// f(rho).
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Comma-separated rho values to evaluate a at.
    #[arg(long)]
    pub rho: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub model: PathBuf,
    /// Hamiltonian; defaults to the model file's.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    /// Comma-separated q_1..q_d,p_1..p_d; defaults to the first seeded sample point.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = gupphase::dynamics::DEFAULT_T_END)]
    pub t_end: f64,
    #[arg(long, default_value_t = gupphase::dynamics::DEFAULT_DT, allow_negative_numbers = true)]
    pub dt: f64,
    /// rk4 | rk45
    #[arg(long, default_value = "rk4")]
    pub method: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Integrate even if the closure check fails.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Args, Debug)]
pub struct QuantumArgs {
    pub model: PathBuf,
    /// left | right; defaults to the model file's, else left.
    #[arg(long)]
    pub ordering: Option<String>,
    /// all | q-only
    #[arg(long, default_value = "all")]
    pub triples: String,
}

#[derive(Args, Debug)]
pub struct AngularArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Hamiltonian for the rotation-invariance check; defaults to the model file's.
    #[arg(long)]
    pub h: Option<String>,
}

/// Run with process stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    run_with(args, &mut out, &mut err)
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
