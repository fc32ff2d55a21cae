use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dlqr",
    version,
    about = "Cost, gradient and stationary-point tools for dynamic output-feedback LQR"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the cost of a controller
    Eval(EvalArgs),
    /// Build and verify the closed-form observable stationary controller
    Stationary(StationaryArgs),
    /// Sweep controller entries (or a similarity orbit) and write a CSV grid
    Landscape(LandscapeArgs),
    /// Compare the analytic gradient with central finite differences
    Gradcheck(GradcheckArgs),
    /// Run gradient descent from a seeded random initialization
    Descend(DescendArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Problem file (JSON)
    #[arg(long)]
    pub problem: PathBuf,
    /// Output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a machine-readable JSON report
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Controller as a JSON file or inline JSON object; defaults to the
    /// problem's seed_controller
    #[arg(long)]
    pub controller: Option<String>,
}

#[derive(Debug, Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest accepted verification residual
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Base controller (JSON file or inline); supplies the fixed entries
    #[arg(long)]
    pub controller: Option<String>,
    /// Swept entry, e.g. `B_K[0,0]=0:8:81`; give once or twice
    #[arg(long = "axis")]
    pub axes: Vec<String>,
    /// Similarity orbit `tmin:tmax:steps` of the base controller under T = t·I
    #[arg(long, conflicts_with = "axes")]
    pub orbit: Option<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of random stabilizing controllers
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative discrepancy
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Finite-difference base step
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Also check this controller (JSON file or inline)
    #[arg(long)]
    pub controller: Option<String>,
}

#[derive(Debug, Args)]
pub struct DescendArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Seed of the random initialization
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from this controller instead of a random one
    #[arg(long)]
    pub controller: Option<String>,
    /// Gradient-norm tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub step0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub backtrack: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub armijo: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Relative noise of the random initialization
    #[arg(long, default_value_t = dlqr_core::descent::DEFAULT_INIT_NOISE)]
    pub init_noise: f64,
    /// Use the fixed step0 as every trial step instead of Barzilai–Borwein
    #[arg(long)]
    pub no_bb: bool,
}
