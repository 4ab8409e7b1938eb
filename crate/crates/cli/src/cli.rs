use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{BasisArg, OutputFormat, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "sizeshare",
    version,
    about = "Firm-size distributions and the aggregate labor share",
    propagate_version = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Plain-text `key = value` settings; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Labor-share denominator.
    #[arg(long, global = true, value_enum)]
    pub basis: Option<BasisArg>,
    #[arg(long, global = true)]
    pub min_cell_size: Option<usize>,
    #[arg(long, global = true)]
    pub hill_k_fraction: Option<f64>,
    /// Elasticity of substitution for the revenue-to-physical correction.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Clamp firm labor shares to their 1st/99th percentiles within cells.
    #[arg(long, global = true)]
    pub winsorize: bool,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Leave the generation time out of the report.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            basis: self.basis.map(Into::into),
            min_cell_size: self.min_cell_size,
            hill_k_fraction: self.hill_k_fraction,
            sigma: self.sigma,
            seed: self.seed,
            winsorize: self.winsorize,
            output_format: self.format,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moments and weighting factor of a truncated Pareto law.
    Moments(MomentsArgs),
    /// Tail index of firm outputs in a CSV panel.
    FitTail(FitTailArgs),
    /// Aggregate Cobb-Douglas implied by micro elasticities.
    Aggregate(AggregateArgs),
    /// Output-weighted aggregate labor share.
    Weighting(WeightingArgs),
    /// Region x industry x period cells with concentration and tail statistics.
    Panel(PanelArgs),
    /// Melitz-Polanec decomposition of the weighted labor share between two years.
    DecomposeMp(DecomposeArgs),
    /// Share of a labor-share change attributable to the tail-index path.
    Counterfactual(CounterfactualArgs),
    /// Synthetic population with planted parameters.
    Simulate(SimulateArgs),
    /// Run the oracle suite; exits 1 if any check fails.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::FitTail(_) => "fit-tail",
            Command::Aggregate(_) => "aggregate",
            Command::Weighting(_) => "weighting",
            Command::Panel(_) => "panel",
            Command::DecomposeMp(_) => "decompose-mp",
            Command::Counterfactual(_) => "counterfactual",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub xi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y_min: f64,
    #[arg(long, conflicts_with = "r", required_unless_present = "r")]
    pub y_max: Option<f64>,
    /// Support ratio y_max / y_min.
    #[arg(long)]
    pub r: Option<f64>,
    /// Orders of E[y^a] to report.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [1.0])]
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TailMethodArg {
    Rank,
    Hill,
    Both,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct FitTailArgs {
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TailMethodArg::Both)]
    pub method: TailMethodArg,
    /// Rank regression on the largest fraction of firms.
    #[arg(long, default_value_t = 1.0)]
    pub top_fraction: f64,
    /// Keep only this year.
    #[arg(long)]
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct AggregateArgs {
    /// Physical labor-output elasticity.
    #[arg(long, allow_negative_numbers = true, required_unless_present = "raw_beta")]
    pub beta: Option<f64>,
    /// Physical capital-output elasticity.
    #[arg(long, allow_negative_numbers = true, required_unless_present = "raw_gamma")]
    pub gamma: Option<f64>,
    /// Revenue elasticity, corrected by sigma/(sigma-1).
    #[arg(long, allow_negative_numbers = true, conflicts_with = "beta")]
    pub raw_beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "gamma")]
    pub raw_gamma: Option<f64>,
    /// Tail index for TFP and the weighting factor.
    #[arg(long, requires = "r")]
    pub xi: Option<f64>,
    #[arg(long, requires = "xi")]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub y_min: f64,
    /// Scale-share gradient for the aggregate share.
    #[arg(long, allow_negative_numbers = true, requires = "xi")]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub n_firms: f64,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct WeightingArgs {
    #[arg(long)]
    pub xi: f64,
    #[arg(long)]
    pub r: f64,
    /// Baseline labor share.
    #[arg(long, allow_negative_numbers = true)]
    pub ls: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WeightArg {
    Output,
    #[value(name = "value-added", alias = "va")]
    ValueAdded,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct PanelArgs {
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = WeightArg::Output)]
    pub weights: WeightArg,
    /// Map a year to a period label, e.g. `1999=early`; repeatable.
    #[arg(long = "period", value_name = "YEAR=LABEL")]
    pub periods: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct DecomposeArgs {
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long)]
    pub from: i32,
    #[arg(long)]
    pub to: i32,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct CounterfactualArgs {
    /// Total labor-share change, percentage points.
    #[arg(long, allow_negative_numbers = true)]
    pub total: f64,
    /// Distribution-driven contribution, percentage points.
    #[arg(long, allow_negative_numbers = true, required_unless_present = "coef")]
    pub contribution: Option<f64>,
    /// Labor-share coefficient on the tail index.
    #[arg(
        long,
        allow_negative_numbers = true,
        conflicts_with = "contribution",
        requires_all = ["alpha_start", "alpha_end"]
    )]
    pub coef: Option<f64>,
    #[arg(long)]
    pub alpha_start: Option<f64>,
    #[arg(long)]
    pub alpha_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LsModeArg {
    FromGradient,
    FromFactors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckArg {
    None,
    Aggregation,
    Weighting,
    Hypotheses,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.892)]
    pub xi: f64,
    #[arg(long, default_value_t = 1e4)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y_min: f64,
    #[arg(long, default_value_t = 0.703)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.329)]
    pub gamma: f64,
    /// Planted scale-share gradient (through the labor elasticity).
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["b", "g"])]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_labor: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_capital: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_ls: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = LsModeArg::FromGradient)]
    pub ls_mode: LsModeArg,
    #[arg(long, default_value = "R0")]
    pub region: String,
    #[arg(long, default_value = "I0")]
    pub industry: String,
    #[arg(long, default_value_t = 2000)]
    pub year: i32,
    /// Write the population as CSV in the ingestion schema.
    #[arg(long, value_name = "PATH")]
    pub export: Option<PathBuf>,
    /// Monte Carlo check to run on the spec.
    #[arg(long, value_enum, default_value_t = CheckArg::None)]
    pub check: CheckArg,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct VerifyArgs {
    /// Number of random decomposition panels.
    #[arg(long, default_value_t = sizeshare_core::verify::MP_FUZZ_PANELS)]
    pub mp_panels: usize,
}
