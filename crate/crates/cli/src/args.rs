use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nilflow::GroupFamily;

#[derive(Parser, Debug)]
#[command(name = "nilflow", version, about = "Ricci-Bourguignon flow on Heisenberg and quaternion groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Connection, curvature and Ricci tensor of a diagonal metric
    Curvature(CurvatureArgs),
    /// Integrate the flow and write the trajectory plus an invariant ledger
    Flow(FlowArgs),
    /// Run the self-check suite; exits 1 if any check fails
    Verify(VerifyArgs),
    /// Spectrum of j(Z), periods and length scaling under the exact flow
    Spectrum(SpectrumArgs),
    /// Run `flow` for each value in a ρ list
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    #[value(alias = "h")]
    Heisenberg,
    #[value(alias = "q")]
    Quaternion,
}

impl From<FamilyArg> for GroupFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Heisenberg => GroupFamily::Heisenberg,
            FamilyArg::Quaternion => GroupFamily::Quaternion,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GroupArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    /// Diagonal initial metric: comma-separated values or `identity`
    #[arg(long, default_value = "identity")]
    pub g0: String,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output path, `-` for standard output
    #[arg(long, default_value = "-")]
    pub output: String,
}

#[derive(Args, Debug, Clone)]
pub struct StepArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 1.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long = "record-every", default_value_t = 10)]
    pub record_every: usize,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[command(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Invariant ledger path; defaults to `<output stem>.ledger.json`
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Exit 3 if the run stops before t_end
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    /// Comma-separated ρ values
    #[arg(long, default_value = "-0.5,0,0.1", allow_hyphen_values = true)]
    pub rho: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Flow time at which the exact metric is evaluated
    #[arg(long = "t-end", default_value_t = 0.0, allow_negative_numbers = true)]
    pub t_end: f64,
    /// Center coordinates of Z, comma-separated; defaults to the first center basis vector
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Complement coordinates of a noncentral element V*, comma-separated
    #[arg(long = "v-star", allow_hyphen_values = true)]
    pub v_star: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Comma-separated ρ values
    #[arg(long, allow_hyphen_values = true)]
    pub rho: String,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Directory for the per-ρ trajectories and `summary.json`
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
