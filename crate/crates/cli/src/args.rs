use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mvtreelet", version, about = "Multi-view treelet transform toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Kronecker graph and noisy views of it.
    Generate(GenerateArgs),
    /// Treelet basis of one covariance matrix.
    Treelet(TreeletArgs),
    /// Joint treelet basis of several views.
    Mvtt(ViewArgs),
    /// FDR-threshold denoising of views in a treelet basis.
    Denoise(DenoiseArgs),
    /// Shared response model fit.
    Srm(SrmArgs),
    /// Convergence of the multi-view basis as the number of views grows.
    Convergence(ConvergenceArgs),
    /// Spread of the convergence statistic across collections.
    Stability(ConvergenceArgs),
    /// Exponential rate fitted to the convergence curves.
    Rate(ConvergenceArgs),
    /// Single-view versus multi-view denoising error.
    CompareDenoise(CompareArgs),
    /// SRM reconstruction error over a range of ranks.
    SrmSweep(SweepArgs),
    /// Cross-group correlation of registered, denoised responses.
    SharedResponse(SharedResponseArgs),
    /// 3×3 box-filter coarsening.
    Coarsen(CoarsenArgs),
    /// Connection density and connected components.
    Metrics(MetricsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Treelet(_) => "treelet",
            Command::Mvtt(_) => "mvtt",
            Command::Denoise(_) => "denoise",
            Command::Srm(_) => "srm",
            Command::Convergence(_) => "convergence",
            Command::Stability(_) => "stability",
            Command::Rate(_) => "rate",
            Command::CompareDenoise(_) => "compare-denoise",
            Command::SrmSweep(_) => "srm-sweep",
            Command::SharedResponse(_) => "shared-response",
            Command::Coarsen(_) => "coarsen",
            Command::Metrics(_) => "metrics",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for result.json and artifacts.
    #[arg(long, default_value = "mvtreelet-out")]
    pub output: PathBuf,
}

/// Kronecker graph family.
#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Initiator matrix CSV (default: built-in 3×3).
    #[arg(long)]
    pub initiator: Option<PathBuf>,
    /// Number of Kronecker products.
    #[arg(long, default_value_t = 3)]
    pub power: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub views: usize,
    #[arg(long, default_value_t = 0.0)]
    pub edge_threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TreeletArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// Covariance matrix CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of rotations (default: half the dimension).
    #[arg(long)]
    pub levels: Option<usize>,
}

/// Views read from files, or generated from the graph family when no input is given.
#[derive(Debug, Clone, Args)]
pub struct ViewArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// View CSV files or directories of them.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 5)]
    pub views: usize,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisKind {
    /// One joint basis for all views.
    Mvtt,
    /// Each view in its own treelet basis.
    Treelet,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub views: ViewArgs,
    #[arg(long, default_value_t = 0.015)]
    pub fdr: f64,
    #[arg(long, value_enum, default_value_t = BasisKind::Mvtt)]
    pub basis: BasisKind,
    /// Noise-free matrix to score the outputs against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub edge_threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SrmArgs {
    #[command(flatten)]
    pub views: ViewArgs,
    /// Shared dimension (default: full).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = mvtreelet::srm::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = mvtreelet::srm::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.1, 0.3, 0.5])]
    pub epsilon: Vec<f64>,
    /// View counts M.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1, 2, 5, 10, 25])]
    pub views: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub collections: usize,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pub views: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.015)]
    pub fdr: f64,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Matrix to reconstruct (default: the noise-free Kronecker graph).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ranks to fit (default: nine evenly spaced ranks up to full).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub rank: Vec<usize>,
    /// Copies of the matrix the model is fitted on.
    #[arg(long, default_value_t = 1)]
    pub views: usize,
    #[arg(long, default_value_t = mvtreelet::srm::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mvtt,
    Srm,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Feature,
    Label,
}

#[derive(Debug, Clone, Args)]
pub struct SharedResponseArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training views (one per subject); requires --test-input.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Testing views, in the same subject order as --input.
    #[arg(long, num_args = 1..)]
    pub test_input: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pub views: usize,
    #[arg(long, default_value_t = 5)]
    pub partitions: usize,
    #[arg(long, default_value_t = 0.01)]
    pub fdr: f64,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [MethodArg::Mvtt, MethodArg::Srm, MethodArg::None])]
    pub method: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [SpaceArg::Feature, SpaceArg::Label])]
    pub space: Vec<SpaceArg>,
    /// SRM rank (default: full).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CoarsenArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub edge_threshold: f64,
}
