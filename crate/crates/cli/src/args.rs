use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use respiro::dataset::{Grouping, SplitFractions, WindowOffset};
use respiro::features::FeatureKind;
use respiro::nn::{Direction, FdPrecision, Merge, Readout};

#[derive(Debug, Parser)]
#[command(
    name = "respiro",
    version,
    about = "Respiratory sound classification with LSTM/BLSTM networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from a directory of recordings and a diagnosis table.
    Ingest(IngestArgs),
    /// Print the class histogram, patient count and majority baseline of a manifest.
    Stats(StatsArgs),
    /// Train a model and write the checkpoint and learning curves.
    Train(TrainArgs),
    /// Score a checkpoint on one subset of a manifest and write the evaluation report.
    Evaluate(EvaluateArgs),
    /// Print class probabilities and the predicted diagnosis for one recording.
    Predict(PredictArgs),
    /// Apply an augmentation plan and write the new recordings with their manifest.
    Augment(AugmentArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Render curves and evaluation files as text tables and plot-ready CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of .wav recordings whose names start with the patient id.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Table of `patient,diagnosis` lines.
    #[arg(long)]
    pub diagnoses: PathBuf,
    /// Output directory; receives manifest.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Frame-level features fed to the network.
    #[arg(long, default_value = "mfcc", value_parser = parse_feature)]
    pub feature: FeatureKind,
    /// Length in seconds of the window cut from each recording.
    #[arg(long, default_value_t = 1.0)]
    pub window_seconds: f64,
    /// Where the window starts: `start` or a seeded random position (`seeded`).
    #[arg(long, default_value = "start")]
    pub window_offset: WindowOffset,
    /// Rate in Hz every recording is resampled to; 0 keeps native rates.
    #[arg(long, default_value_t = 4000)]
    pub sample_rate: u32,
    /// Skip recordings that cannot be read instead of failing [default: off].
    #[arg(long)]
    pub skip_bad_files: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.7,0.1,0.2")]
    pub split: SplitFractions,
    /// Split unit: single recordings or whole patients.
    #[arg(long, default_value = "sample", value_parser = parse_group)]
    pub group: Grouping,
    /// Split each class separately to keep class proportions [default: off].
    #[arg(long)]
    pub stratify: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// LSTM hidden size.
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Recurrent layer: unidirectional LSTM or BLSTM.
    #[arg(long, default_value = "uni", value_parser = parse_mode)]
    pub mode: Direction,
    /// How BLSTM directions are combined.
    #[arg(long, default_value = "concat", value_parser = parse_merge)]
    pub merge: Merge,
    /// Per-step outputs fed to the classifier: final step or mean over steps.
    #[arg(long, default_value = "last", value_parser = parse_readout)]
    pub readout: Readout,
    /// Initialize forget-gate biases to 1 instead of 0 [default: off].
    #[arg(long)]
    pub forget_bias_one: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; receives model.ckpt and curves.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for the split, initialization, shuffling and window offsets.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// SGD step size.
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Passes over the training subset.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Rescale each example's gradient to at most this L2 norm [default: no clipping].
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Keep the parameters of the epoch with the best validation accuracy [default: off].
    #[arg(long)]
    pub keep_best: bool,
    /// Visit training examples in manifest order every epoch [default: off].
    #[arg(long)]
    pub no_shuffle: bool,
    /// Feed raw features instead of train-set standardized ones [default: off].
    #[arg(long)]
    pub no_standardize: bool,
    /// Epochs without validation-loss improvement reported as a plateau.
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Manifest CSV the checkpoint was trained on.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory; receives report.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Subset to score. The split is recomputed from the settings stored in the checkpoint.
    #[arg(long, value_enum, default_value = "test")]
    pub subset: SubsetChoice,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Recording to classify.
    #[arg(long)]
    pub input: PathBuf,
    /// Seed for a seeded window offset [default: the checkpoint seed].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Manifest CSV of the source recordings.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Plan file, one `transform=name key=value ...` line per transform.
    #[arg(long)]
    pub plan: PathBuf,
    /// Output directory; receives the new recordings and manifest.csv.
    #[arg(long, default_value = "augmented")]
    pub out: PathBuf,
    /// Oversample minority classes up to the modal count, cycling through the
    /// plan transforms, instead of applying every transform to every recording [default: off].
    #[arg(long)]
    pub balance: bool,
    /// List the source recordings in the output manifest as well [default: off].
    #[arg(long)]
    pub include_originals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionChoice {
    Double,
    Extended,
    Adaptive,
}

impl From<PrecisionChoice> for FdPrecision {
    fn from(p: PrecisionChoice) -> Self {
        match p {
            PrecisionChoice::Double => FdPrecision::Double,
            PrecisionChoice::Extended => FdPrecision::Extended,
            PrecisionChoice::Adaptive => FdPrecision::Adaptive,
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Take the input from the first recording of this manifest [default: a synthetic tone].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Seed for the model parameters and the synthetic input.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// LSTM hidden size.
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    /// Recurrent layer: unidirectional LSTM or BLSTM.
    #[arg(long, default_value = "uni", value_parser = parse_mode)]
    pub mode: Direction,
    /// How BLSTM directions are combined.
    #[arg(long, default_value = "concat", value_parser = parse_merge)]
    pub merge: Merge,
    /// Per-step outputs fed to the classifier.
    #[arg(long, default_value = "last", value_parser = parse_readout)]
    pub readout: Readout,
    /// Number of feature frames in the checked sequence.
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    /// Class label for the loss.
    #[arg(long, default_value_t = 0)]
    pub label: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Arithmetic for the finite-difference loss evaluations.
    #[arg(long, value_enum, default_value = "adaptive")]
    pub precision: PrecisionChoice,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Curves file written by `train` [default: none].
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Report file written by `evaluate` [default: none].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for curves.csv, per_class.csv and confusion.csv [default: print tables only].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: respiro::features::FeatureError| e.to_string())
}

fn parse_group(s: &str) -> Result<Grouping, String> {
    s.parse().map_err(|e: respiro::dataset::DatasetError| e.to_string())
}

fn parse_mode(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: respiro::nn::NnError| e.to_string())
}

fn parse_merge(s: &str) -> Result<Merge, String> {
    s.parse().map_err(|e: respiro::nn::NnError| e.to_string())
}

fn parse_readout(s: &str) -> Result<Readout, String> {
    s.parse().map_err(|e: respiro::nn::NnError| e.to_string())
}
