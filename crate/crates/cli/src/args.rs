use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wald_cpd::critical_values::{DEFAULT_GRID, DEFAULT_REPS, DEFAULT_SEED};
use wald_cpd::WeightEstimator;

/// Retrospective parameter-change test for multivariate time series.
#[derive(Debug, Parser)]
#[command(name = "wald-cpd", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a series for a single parameter change and locate it.
    Detect(DetectArgs),
    /// Simulate a scenario and write the series as CSV.
    Simulate(SimulateArgs),
    /// Tabulate critical values and store them in the cache.
    Calibrate(CalibrateArgs),
    /// Run the level/power Monte-Carlo study.
    Table1(Table1Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Gaussian quasi-likelihood VAR(1), identity covariance.
    Var1,
    /// Poisson quasi-likelihood INGARCH(1) for counts.
    Ingarch1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Weight {
    /// Average of the head- and tail-segment sandwich estimates.
    Boundary,
    /// Sandwich estimate on the whole sample.
    FullSample,
}

impl From<Weight> for WeightEstimator {
    fn from(w: Weight) -> Self {
        match w {
            Weight::Boundary => WeightEstimator::Boundary,
            Weight::FullSample => WeightEstimator::FullSample,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Component {
    Poisson,
    Nb,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Grid points per Brownian-bridge path.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub cv_grid: usize,
    /// Monte-Carlo paths per critical value.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub cv_reps: usize,
    /// Seed of the critical-value simulation.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub cv_seed: u64,
    /// Critical-value cache directory [env: WALD_CPD_CACHE_DIR, default: .wald-cpd-cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Series as CSV with header y1,...,ym and one row per time point.
    pub input: PathBuf,
    /// Model family.
    #[arg(long, value_enum)]
    pub model: Family,
    /// Nominal level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Conditional law per count component, comma separated. Checked against
    /// the series width; the fit uses the Poisson quasi-likelihood throughout.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub components: Vec<Component>,
    /// Size parameter of negative-binomial components.
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Wald weight matrix.
    #[arg(long, value_enum, default_value_t = Weight::Boundary)]
    pub weight: Weight,
    /// Result JSON path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the statistic for every split point as CSV (k,q).
    #[arg(long)]
    pub emit_qk: Option<PathBuf>,
    /// Worker threads; all cores if omitted.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON (model, theta0, optional theta1 and t_star, n, seed).
    pub scenario: PathBuf,
    /// Output CSV path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Parameter dimension.
    #[arg(long)]
    pub d: usize,
    /// Levels to tabulate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub alpha_list: Vec<f64>,
    /// Grid points per Brownian-bridge path.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Monte-Carlo paths.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    /// Simulation seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Cache directory [env: WALD_CPD_CACHE_DIR, default: .wald-cpd-cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; all cores if omitted.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    /// Experiment JSON; the built-in eight-scenario study if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replications per scenario, overriding the config.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Run only these scenario ids (repeatable).
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    /// Size parameter for negative-binomial components, overriding the config.
    #[arg(long)]
    pub r: Option<f64>,
    /// Wald weight matrix, overriding the config.
    #[arg(long, value_enum)]
    pub weight: Option<Weight>,
    /// Report JSON path; the config's output path, else standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; the config's value, else all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the built-in config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Critical-value cache directory [env: WALD_CPD_CACHE_DIR, default: .wald-cpd-cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}
