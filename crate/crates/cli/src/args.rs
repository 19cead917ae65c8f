use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "thinlab", version, about = "Data thinning: split, diagnose, cross-validate and simulate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thin a matrix into two folds with weights (eps, 1 - eps).
    Thin(ThinArgs),
    /// Thin a matrix into M folds.
    Multithin(MultithinArgs),
    /// Fold correlation when thinning with a wrong nuisance parameter.
    Diagnose(DiagnoseArgs),
    /// Loss curve over K by naive, single-fold or multifold validation.
    Cv(CvArgs),
    /// Run one of the simulation studies.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Poisson,
    Gaussian,
    /// Multivariate Gaussian; rows are observations, --cov gives Σ.
    Mvn,
    #[value(alias = "nb", alias = "negative-binomial")]
    Negbin,
    Gamma,
    Exponential,
    Binomial,
    /// Rows are count vectors summing to --trials.
    Multinomial,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyName,
    /// Known variance (gaussian).
    #[arg(long)]
    pub var: Option<f64>,
    /// CSV file holding the known covariance (mvn).
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Known size r (negbin).
    #[arg(long)]
    pub size: Option<f64>,
    /// Known shape α (gamma).
    #[arg(long)]
    pub shape: Option<f64>,
    /// Number of trials (binomial, multinomial).
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct IoArgs {
    /// Input CSV matrix.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ThinArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Weight of the first fold.
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct MultithinArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Comma-separated fold weights summing to 1.
    #[arg(long, value_delimiter = ',', required_unless_present = "folds", conflicts_with = "folds")]
    pub eps: Option<Vec<f64>>,
    /// Number of equal-weight folds.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    Gaussian,
    #[value(alias = "nb", alias = "negative-binomial")]
    Negbin,
    Gamma,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// True data-generating law.
    #[arg(long, value_enum)]
    pub law: LawName,
    /// Mean (gaussian).
    #[arg(long)]
    pub mean: Option<f64>,
    /// Variance (gaussian).
    #[arg(long)]
    pub var: Option<f64>,
    /// Size r (negbin).
    #[arg(long)]
    pub size: Option<f64>,
    /// Success probability (negbin).
    #[arg(long)]
    pub prob: Option<f64>,
    /// Shape α (gamma).
    #[arg(long)]
    pub shape: Option<f64>,
    /// Rate (gamma).
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 0.44)]
    pub eps: f64,
    /// Smallest assumed nuisance; defaults to 0.1 × the true value.
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// Largest assumed nuisance; defaults to 2 × the true value.
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub grid_points: usize,
    /// Monte Carlo replicates per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Naive,
    Single,
    Multifold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Nll,
    Mse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Pca,
    Cluster,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Defaults to pca for binomial data and cluster for gamma data.
    #[arg(long, value_enum)]
    pub task: Option<TaskName>,
    #[arg(long, value_enum, default_value = "multifold")]
    pub method: MethodName,
    #[arg(long, value_enum, default_value = "nll")]
    pub loss: LossName,
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Fold count for multifold.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Training weight for single-fold.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SplitIid,
    SplitLeverage,
    Pca,
    GammaSmall,
    GammaLarge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossChoice {
    Nll,
    Mse,
    Both,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Replicates; 1000 for split experiments and 200 otherwise.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    pub loss: LossChoice,
    /// Comma-separated ε values: training weights for single-fold selection
    /// (default 0.5,0.8), or the split weight for split experiments
    /// (default 0.2,0.8 iid, 0.5,0.8 high leverage).
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Fold count of the multifold method; 0 leaves it out.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Leave out the naive method.
    #[arg(long)]
    pub no_naive: bool,
    /// Common value of the nonzero coefficients (split experiments).
    #[arg(long, default_value_t = 0.3)]
    pub beta_star: f64,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}
