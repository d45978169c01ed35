use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pin-twsvm", version, about = "Pinball twin SVMs with privileged information")]
pub struct Cli {
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model and write it as JSON.
    Train(TrainArgs),
    /// Label the rows of a dataset with a saved model.
    Predict(PredictArgs),
    /// Stratified k-fold cross-validation with per-fold grid tuning.
    Cv(CvArgs),
    /// Synthetic, noise, solver-speed and dataset benchmark tables.
    Bench(BenchArgs),
    /// Principal-component privileged features and their basis.
    ExtractPi(ExtractArgs),
    /// Miss rate against false positives per image for box detections.
    DetectEval(DetectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(name = "pin-twsvmpi")]
    PinTwsvmpi,
    #[value(name = "pin-twsvm")]
    PinTwsvm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset file: features then an integer label per row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Feature columns (0-based, comma-separated) moved into the privileged space.
    #[arg(long, value_delimiter = ',', conflicts_with = "privileged_data")]
    pub privileged_cols: Option<Vec<usize>>,
    /// Privileged features as a numeric CSV aligned row by row with --data.
    #[arg(long)]
    pub privileged_data: Option<PathBuf>,
    /// Principal components used as privileged features: a count or a variance fraction.
    #[arg(long)]
    pub pca_components: Option<String>,
    /// Leave features unscaled.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "pin-twsvmpi")]
    pub family: FamilyArg,
    #[arg(long, value_delimiter = ',')]
    pub c1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub c2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "linear")]
    pub kernel: KernelArg,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// `paper` (squared-norm denominator, the default) or `euclidean`.
    #[arg(long, default_value = "paper")]
    pub distance_rule: String,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output model path.
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Every column is a feature; no label column.
    #[arg(long)]
    pub no_labels: bool,
    /// Columns to drop, matching the --privileged-cols used for training.
    #[arg(long, value_delimiter = ',')]
    pub privileged_cols: Option<Vec<usize>>,
    /// Override the distance rule stored in the model.
    #[arg(long)]
    pub distance_rule: Option<String>,
    /// Prediction table path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Do not synthesize privileged features; trains the plain baseline unless
    /// --privileged-cols or --privileged-data is given.
    #[arg(long)]
    pub no_privileged: bool,
    /// Append per-fold wall-clock training time (makes the report run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Synthetic,
    Noise,
    Speed,
    Uci,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "synthetic,noise")]
    pub suite: Vec<Suite>,
    /// Dataset files for the `uci` suite.
    #[arg(long, value_delimiter = ',')]
    pub data: Vec<PathBuf>,
    /// Repetitions for the synthetic and noise suites.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2")]
    pub flip_rates: Vec<f64>,
    /// Center distance of the synthetic and noise blobs, in standard deviations.
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
    /// Per-class size for the speed suite.
    #[arg(long, default_value_t = 250)]
    pub speed_m: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub pca_components: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory receiving one `<suite>.csv` per suite; stdout when absent.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(long)]
    pub pca_components: Option<String>,
    #[arg(long)]
    pub no_standardize: bool,
    /// Privileged feature matrix (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Fitted basis (JSON).
    #[arg(long)]
    pub basis_out: PathBuf,
    /// Apply an existing basis instead of fitting one.
    #[arg(long, conflicts_with = "pca_components")]
    pub basis: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// `image_id x_min y_min x_max y_max score` per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// `image_id x_min y_min x_max y_max` per line.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Score thresholds; every distinct detection score when absent.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
