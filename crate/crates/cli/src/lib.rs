//! Command-line driver: argument and config parsing, run orchestration and
//! report writing for the `meanfield` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_list, parse_real, Settings};
pub use report::{strip_timestamp, Report};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage and configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status when a solver did not converge (partial outputs are kept).
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "meanfield", version, about = "Mean field equation solvers on the annulus and the flat torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Newton (or minimization below 8π) from a given start.
    Solve(SolveArgs),
    /// Radial solution of the annulus problem by shooting.
    Radial(RadialArgs),
    /// Family construction, deformation and saddle refinement.
    Minimax(MinimaxArgs),
    /// Non-constant solution on the flat torus.
    Torus(TorusArgs),
    /// Continuation of a solution branch in the coupling.
    Sweep(SweepArgs),
    /// Empirical Moser–Trudinger functional sweep.
    MtCheck(MtArgs),
    /// Residual, Morse index and concentration of a saved field.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the report and CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `annulus` or `torus`.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, value_parser = parse_real)]
    pub r_inner: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub r_outer: Option<f64>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub ntheta: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub lx: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub ly: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Torus Laplacian: `spectral` or `five-point`.
    #[arg(long)]
    pub stencil: Option<String>,
    /// Newton tolerance on the residual dual norm (relative to the field scale).
    #[arg(long, value_parser = parse_real)]
    pub tol: Option<f64>,
    /// Number of second-variation eigenvalues computed.
    #[arg(long)]
    pub eigen_count: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct FamilyArgs {
    #[arg(long)]
    pub n_radial: Option<usize>,
    #[arg(long)]
    pub n_angular: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub lambda_max: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub j_low: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub delta_cont: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub window_fraction: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub grad_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Coupling `ρ` (annulus) or `c` (torus).
    #[arg(long, visible_alias = "c", value_parser = parse_real)]
    pub rho: Option<f64>,
    /// `zero`, `radial` or a field CSV path.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub max_descent: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RadialArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_real)]
    pub rho: Option<f64>,
    /// Nodes of the output profile.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MinimaxArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, visible_alias = "c", value_parser = parse_real)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TorusArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_parser = parse_real)]
    pub c: Option<f64>,
    /// Circle traversed by the boundary loop: `x` or `y`.
    #[arg(long)]
    pub axis: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_parser = parse_real)]
    pub from: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// `radial`, `minimax`, `zero` or a field CSV path.
    #[arg(long)]
    pub start: Option<String>,
    /// Cap on `∫|∇u|²` along the branch.
    #[arg(long, value_parser = parse_real)]
    pub cap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MtArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_real)]
    pub coefficient: Option<f64>,
    /// `bubbles`, `random` or `all`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Number of random fields.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_parser = parse_list)]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_list)]
    pub scales: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_real)]
    pub floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Field CSV to analyze.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, visible_alias = "c", value_parser = parse_real)]
    pub rho: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub radius: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub threshold: Option<f64>,
}

/// Exit status for an error from the solvers.
pub fn exit_code(err: &meanfield::Error) -> i32 {
    use meanfield::Error::*;
    match err {
        NoConvergence { .. } | Numeric(_) | Internal(_) => EXIT_NO_CONVERGENCE,
        Config(_) | Mismatch { .. } | DegenerateLoop { .. } | Parse { .. } | Io(_) => EXIT_CONFIG,
    }
}

/// Parse `args` (program name first), run the command and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
