use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "authcap",
    version,
    about = "Rate regions, I-projections and exact code simulation for authentication over noisy channels",
    after_help = "Any subcommand accepts --config FILE: a JSON object mapping long flag names to values \
                  (plus an optional \"command\" key). Flags given on the command line take precedence. \
                  AUTHCAP_THREADS caps the worker pool."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a rate point for membership in an inner-bound region.
    Region(RegionArgs),
    /// Trace the largest authentication rate along one parameter.
    Sweep(SweepArgs),
    /// Solve one constrained divergence minimization.
    Project(ProjectArgs),
    /// Evaluate the channel-derived authentication budget.
    Lfunc(LfuncArgs),
    /// Trade message rate for authentication rate and key.
    Transform(TransformArgs),
    /// Exact statistics of random keyed-subset codes over a noiseless channel.
    SimulateSimmons(SimmonsArgs),
    /// Exact error and interlope success of a concrete code.
    SimulateCode(CodeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Main and interloper channels: binary symmetric by default, or explicit
/// row-stochastic matrices written `a,b;c,d`.
#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Flip probability of the main channel.
    #[arg(long, default_value_t = 0.05)]
    pub lt: f64,
    /// Flip probability of the interloper's channel.
    #[arg(long, default_value_t = 0.25)]
    pub lq: f64,
    /// Explicit main channel, rows separated by `;`.
    #[arg(long)]
    pub t_kernel: Option<String>,
    /// Explicit interloper channel, rows separated by `;`.
    #[arg(long)]
    pub q_kernel: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Uniform,
    Identity,
}

/// Auxiliary laws. Either all of `--rho --sigma --tau`, or `--rho-flip` with
/// a σ shape for the binary-symmetric family.
#[derive(Debug, Clone, Args)]
pub struct AuxArgs {
    /// ρ(x|u) as a matrix.
    #[arg(long)]
    pub rho: Option<String>,
    /// σ(u|w) as a 0/1 matrix with one positive entry per column.
    #[arg(long)]
    pub sigma: Option<String>,
    /// τ(w) as a comma-separated vector.
    #[arg(long)]
    pub tau: Option<String>,
    /// ρ = BSC(flip) on binary U.
    #[arg(long)]
    pub rho_flip: Option<f64>,
    /// σ realization for `--rho-flip`.
    #[arg(long, value_enum, default_value_t = Shape::Uniform)]
    pub sigma_shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Search {
    Symmetric,
    Simplex,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Cells over the ρ flip in [0, 1/2].
    #[arg(long, default_value_t = 50)]
    pub rho_steps: usize,
    /// Cells over ν in the authentication budget.
    #[arg(long, default_value_t = 200)]
    pub nu_steps: usize,
    /// Cells over the comparison region's input bias.
    #[arg(long, default_value_t = 50)]
    pub tau_steps: usize,
    /// Simplex denominator for the comparison region's ν.
    #[arg(long, default_value_t = 100)]
    pub gungor_nu_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "3")]
    Three,
    Gungor,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RegionArgs {
    #[arg(long, value_enum, default_value_t = Theorem::Three)]
    pub theorem: Theorem,
    /// Rate point `r,alpha,kappa`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Rounds sharing one key.
    #[arg(long, default_value_t = 1)]
    pub j: u32,
    #[command(flatten)]
    pub channels: ChannelArgs,
    #[command(flatten)]
    pub aux: AuxArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// ν search inside the authentication budget.
    #[arg(long, value_enum, default_value_t = Search::Symmetric)]
    pub search: Search,
    /// κ̃ scan resolution for the comparison region.
    #[arg(long, default_value_t = 0.001)]
    pub kappa_tilde_resolution: f64,
    /// Slack tolerance for membership.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    RVsAlpha,
    AlphaVsKappa,
    AlphaVsLambdaT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Compare {
    None,
    Gungor,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = Mode::RVsAlpha)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Message rate when not swept.
    #[arg(long, default_value_t = 0.25)]
    pub r: f64,
    /// Key rate when not swept.
    #[arg(long, default_value_t = 0.25)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1)]
    pub j: u32,
    #[arg(long, value_enum, default_value_t = Compare::None)]
    pub compare: Compare,
    /// Main channel flip probability (the swept one in alpha-vs-lambda-t).
    #[arg(long, default_value_t = 0.05)]
    pub lt: f64,
    #[arg(long, default_value_t = 0.25)]
    pub lq: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also draw the curve as an SVG polyline.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectMode {
    /// Pin both marginals.
    Both,
    /// Pin the output marginal only.
    Single,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ProjectArgs {
    #[arg(long, value_enum, default_value_t = ProjectMode::Both)]
    pub mode: ProjectMode,
    /// Reference channel flip probability.
    #[arg(long, default_value_t = 0.05)]
    pub lt: f64,
    /// Explicit reference channel.
    #[arg(long)]
    pub t_kernel: Option<String>,
    /// ρ(x|u).
    #[arg(long, default_value = "1,0;0,1")]
    pub rho: String,
    /// Law of the conditioning symbol u.
    #[arg(long, default_value = "0.5,0.5")]
    pub sigma: String,
    /// Target marginal over outputs given u; the reference pushed through ρ when absent.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct LfuncArgs {
    #[command(flatten)]
    pub channels: ChannelArgs,
    #[command(flatten)]
    pub aux: AuxArgs,
    #[arg(long, value_enum, default_value_t = Search::Symmetric)]
    pub search: Search,
    #[arg(long, default_value_t = 200)]
    pub nu_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TransformArgs {
    /// Rate point `r,alpha,kappa`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Message rate moved into authentication, `0 <= beta < r`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub j: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SimmonsArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    /// Number of keys; a perfect square.
    #[arg(long, default_value_t = 4)]
    pub keys: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Codes to draw; code `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub codes: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// One codeword per (message, key), decoded by table lookup.
    Keyed,
    /// Random type-class codebook with the maximum-likelihood class decoder.
    Typeclass,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CodeArgs {
    #[arg(long, value_enum, default_value_t = Kind::Keyed)]
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Channel input alphabet size (keyed codes).
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[arg(long, default_value_t = 4)]
    pub keys: usize,
    /// Keyed codebook as sequence indices, one key per `;`-separated row.
    #[arg(long)]
    pub codewords: Option<String>,
    /// Rounds per key (type-class codes).
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    #[arg(long, default_value_t = 1)]
    pub message_hat: usize,
    #[arg(long, default_value_t = 1)]
    pub message_tilde: usize,
    /// Type of w as counts, e.g. `2,1`.
    #[arg(long)]
    pub tau: Option<String>,
    /// Conditional type of u given w as counts, rows by `;`.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Conditional type of x given u as counts, rows by `;`.
    #[arg(long)]
    pub rho: Option<String>,
    /// Main channel flip, exact (`1/10`, `0.1`).
    #[arg(long, default_value = "1/10")]
    pub t_flip: String,
    /// Interloper channel flip, exact.
    #[arg(long, default_value = "1/4")]
    pub q_flip: String,
    /// Explicit main channel with exact entries.
    #[arg(long)]
    pub t_kernel: Option<String>,
    /// Explicit interloper channel with exact entries.
    #[arg(long)]
    pub q_kernel: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep this many messages and spend extra key on re-indexing them.
    #[arg(long)]
    pub remap: Option<usize>,
    /// Monte Carlo samples of the decoding error; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub mc_samples: u64,
    /// Samples used when the exact error exceeds the work budget.
    #[arg(long, default_value_t = 100_000)]
    pub fallback_samples: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutputArgs,
}
