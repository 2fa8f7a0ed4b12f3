use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pgg_core::dynamics::{DEFAULT_HORIZON, DEFAULT_STEP};
use pgg_core::equilibrium::{DEFAULT_CLUSTER_TOL, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "pgg", version, about = "Networked public goods games: equilibria, dynamics, certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a Nash equilibrium.
    Solve(SolveArgs),
    /// Check whether a profile is an ε-equilibrium.
    Verify(VerifyArgs),
    /// Integrate the pseudo-gradient or welfare gradient flow.
    Dynamics(DynamicsArgs),
    /// Run the uniqueness certificates.
    Certify(CertifyArgs),
    /// Apply an affine equivalence map to a game.
    Transform(TransformArgs),
    /// Comparative statics of a money transfer.
    Statics(StaticsArgs),
    /// Random-network case studies.
    #[command(subcommand)]
    Casestudy(CaseStudy),
    /// Enumerate equilibria on a uniform grid.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// Per-player step scaling: `ones` or a comma-separated list.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Step size; derived from the game when omitted.
    #[arg(long)]
    pub step_eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// Starting profile; the lower bounds when omitted.
    #[arg(long)]
    pub x0: Option<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Decreasing regularization schedule, e.g. `1,0.1,0.01`.
    #[arg(long, conflicts_with_all = ["starts", "backward"])]
    pub betas: Option<String>,
    /// Probe with this many seeded random starts and cluster the results.
    #[arg(long, conflicts_with = "backward")]
    pub starts: Option<usize>,
    #[arg(long, env = "PGG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
    pub cluster_tol: f64,
    /// Backward induction (upper-triangular games only).
    #[arg(long)]
    pub backward: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    PseudoGradient,
    Welfare,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub x0: String,
    #[arg(long, value_enum, default_value_t = FieldKind::PseudoGradient)]
    pub field: FieldKind,
    /// Per-player rates for the pseudo-gradient field: `ones` or a list.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: f64,
    /// Skip the per-sample best-response gap.
    #[arg(long)]
    pub no_br_gap: bool,
    /// Optimal welfare; enables a convergence-rate fit of the welfare gap.
    #[arg(long)]
    pub sw_star: Option<f64>,
    /// Gaps below this floor are dropped before fitting.
    #[arg(long, default_value_t = 1e-12)]
    pub fit_floor: f64,
    /// Trajectory CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Common value function as JSON, e.g. `{"family":"log_value","params":{"a":2,"s":1}}`.
    #[arg(long)]
    pub f_common: Option<String>,
    /// JSON file with a list of reference matrices (lists of rows).
    #[arg(long)]
    pub w0: Option<PathBuf>,
    /// JSON file with a list of `{"d": [...], "b": [...]}` maps.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Also try the triangular normalizer.
    #[arg(long)]
    pub triangular: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, required_unless_present = "triangular", requires = "b")]
    pub d: Option<String>,
    #[arg(long, requires = "d")]
    pub b: Option<String>,
    /// Use the triangular normalizer `d_i = ε^{-i}`.
    #[arg(long, conflicts_with_all = ["d", "b"])]
    pub triangular: bool,
    /// Normalizer scale; chosen automatically when omitted.
    #[arg(long, requires = "triangular")]
    pub eps: Option<f64>,
    /// Profile to carry across the map.
    #[arg(long)]
    pub x: Option<String>,
    /// Map `--x` from the transformed game back to the source.
    #[arg(long, requires = "x")]
    pub inverse: bool,
    /// Write the transformed game file here.
    #[arg(long)]
    pub out_game: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct StaticsArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// Transfer direction, one entry per player.
    #[arg(long)]
    pub delta: String,
    /// Equilibrium to expand around; solved from `--x0` when omitted.
    #[arg(long)]
    pub x_star: Option<String>,
    #[arg(long, conflicts_with = "x_star")]
    pub x0: Option<String>,
    /// Also compare against central differences with this step.
    #[arg(long)]
    pub fd_t: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Subcommand)]
pub enum CaseStudy {
    /// Erdős–Rényi networks: δ moments and certificate rates.
    Case1(Case1Args),
    /// Upper-triangular networks: normalizer and three-way solve.
    Case2(Case2Args),
}

#[derive(Debug, Args)]
pub struct ValueFlags {
    #[arg(long, default_value_t = 3.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,
}

#[derive(Debug, Args)]
pub struct Case1Args {
    #[arg(long)]
    pub n: usize,
    /// Expected degree; the edge probability is `p0/n`.
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub samples: usize,
    #[command(flatten)]
    pub value: ValueFlags,
    #[arg(long, env = "PGG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Per-sample CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Case2Args {
    #[arg(long)]
    pub n: usize,
    /// Probability of each above-diagonal edge.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[command(flatten)]
    pub value: ValueFlags,
    #[arg(long, env = "PGG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// Grid points per player.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Test deviations to grid points only.
    #[arg(long)]
    pub grid_only: bool,
    #[command(flatten)]
    pub output: Output,
}
