use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scpo::metrics::InefficiencyMeasure;
use scpo::search::GridSpec;
use scpo::surrogate::{Hyperparams, Transform};

#[derive(Debug, Parser)]
#[command(name = "scpo", version, about = "Train and evaluate conformal classifiers with optimized conformity measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a linear conformity measure with fixed hyperparameters
    Train(TrainArgs),
    /// Train every cell of a hyperparameter grid and keep the best
    Gridsearch(GridArgs),
    /// Fit the multinomial logistic regression baseline
    Baseline(BaselineArgs),
    /// Store calibration scores in a model file
    Calibrate(CalibrateArgs),
    /// Write prediction sets for every row of a CSV
    Predict(PredictArgs),
    /// Compare two calibrated models on labelled data
    Compare(CompareArgs),
    /// Split one dataset and compare the grid-searched model with the baseline
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training CSV with a header row
    #[arg(long)]
    pub data: PathBuf,

    /// Name of the label column
    #[arg(long)]
    pub label_col: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,

    /// Significance level
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,

    /// Weight of the validity penalty
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,

    /// Sigmoid sharpness
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,

    /// Learning rate
    #[arg(long, default_value_t = 10.0)]
    pub eta: f64,

    #[arg(long, default_value_t = Transform::NegInverse)]
    pub transform: Transform,

    /// Inefficiency measure: identity (set size) or log (log of size + 1)
    #[arg(long, default_value_t = InefficiencyMeasure::Identity)]
    pub ineff: InefficiencyMeasure,

    /// Maximum number of descent steps
    #[arg(long, default_value_t = Hyperparams::DEFAULT_MAX_ITERS)]
    pub iters: usize,

    /// Where to write the model file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub input: DataArgs,

    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,

    #[arg(long, default_value_t = InefficiencyMeasure::Identity)]
    pub ineff: InefficiencyMeasure,

    #[arg(long, default_value_t = Transform::NegInverse)]
    pub transform: Transform,

    /// Comma-separated λ values
    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_LAMBDAS)]
    pub lambdas: Vec<f64>,

    /// Comma-separated γ values
    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_GAMMAS)]
    pub gammas: Vec<f64>,

    /// Comma-separated η values
    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_ETAS)]
    pub etas: Vec<f64>,

    #[arg(long, default_value_t = Hyperparams::DEFAULT_MAX_ITERS)]
    pub iters: usize,

    /// Worker threads; defaults to one per core
    #[arg(long, env = "SCPO_JOBS")]
    pub jobs: Option<usize>,

    /// Where to write the winning model
    #[arg(long)]
    pub out: PathBuf,

    /// Per-cell results
    #[arg(long)]
    pub grid_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: DataArgs,

    #[arg(long, default_value_t = 500)]
    pub iters: usize,

    /// Stop once the largest gradient entry is at most this
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Inefficiency measure recorded in the model for later reports
    #[arg(long, default_value_t = InefficiencyMeasure::Identity)]
    pub ineff: InefficiencyMeasure,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// Labelled calibration CSV
    #[arg(long)]
    pub calib: PathBuf,

    /// Label column, if it differs from the training file
    #[arg(long)]
    pub label_col: Option<String>,

    /// Output model file; may equal --model
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// CSV with the model's feature columns; other columns are ignored
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub epsilon: f64,

    /// Output CSV; standard output if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model_a: PathBuf,

    #[arg(long)]
    pub model_b: PathBuf,

    /// Labelled test CSV
    #[arg(long)]
    pub data: PathBuf,

    /// Label column of --data; defaults to the one model A was trained on
    #[arg(long)]
    pub labels: Option<String>,

    #[arg(long)]
    pub epsilon: f64,

    #[arg(long, default_value_t = InefficiencyMeasure::Identity)]
    pub ineff: InefficiencyMeasure,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub input: DataArgs,

    /// Turn a numeric label into two classes: `high` if >= this, else `low`
    #[arg(long)]
    pub binarize_at: Option<f64>,

    /// Train,calibration,test row counts; equal thirds if omitted
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<usize>>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Comma-separated significance levels
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
    pub epsilons: Vec<f64>,

    #[arg(long, default_value_t = InefficiencyMeasure::Identity)]
    pub ineff: InefficiencyMeasure,

    #[arg(long, default_value_t = Transform::NegInverse)]
    pub transform: Transform,

    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_LAMBDAS)]
    pub lambdas: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_GAMMAS)]
    pub gammas: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_values_t = GridSpec::DEFAULT_ETAS)]
    pub etas: Vec<f64>,

    #[arg(long, default_value_t = Hyperparams::DEFAULT_MAX_ITERS)]
    pub iters: usize,

    #[arg(long, env = "SCPO_JOBS")]
    pub jobs: Option<usize>,

    /// Also write one evaluation row per method and level
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
}
