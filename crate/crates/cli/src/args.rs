use std::path::PathBuf;

use btud::experiment::{ExperimentKind, Method, Solver};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "btud",
    version,
    about = "Tensor decomposition based unsupervised feature selection"
)]
pub struct Cli {
    /// Base seed; ensemble member `i` uses `seed + i`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for ensemble members and parallel kernels (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a data set and its truth labels.
    Generate(GenerateArgs),
    /// Fit a Tucker model to a tensor data file.
    Decompose(DecomposeArgs),
    /// Compute P-values and select features.
    Select(SelectArgs),
    /// Compare a selection with truth labels.
    Evaluate(EvaluateArgs),
    /// Run generate, decompose, select and evaluate over many seeds.
    Ensemble(EnsembleArgs),
    /// Write plot-ready CSV tables from earlier outputs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    SyntheticBlock,
    Sinusoid,
    RcsGcm,
    Custom,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::SyntheticBlock => ExperimentKind::SyntheticBlock,
            KindArg::Sinusoid => ExperimentKind::Sinusoid,
            KindArg::RcsGcm => ExperimentKind::RcsGcm,
            KindArg::Custom => ExperimentKind::Custom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Hooi,
    Btud,
    HooiThenCheck,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Hooi => Solver::Hooi,
            SolverArg::Btud => Solver::Btud,
            SolverArg::HooiThenCheck => Solver::HooiThenCheck,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Btud,
    Td,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Btud => Method::Btud,
            MethodArg::Td => Method::Td,
        }
    }
}

/// Experiment configuration: a JSON file, a preset, and flag overrides on top.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON configuration file. Fields left out take the preset values of its `experiment`.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Named experiment whose preset is used.
    #[arg(long, value_enum)]
    pub experiment: Option<KindArg>,

    /// Override one configuration field, e.g. `--set synthetic.n1=20`. The
    /// value is read as JSON when it parses, otherwise as a string.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,

    /// Tucker ranks as `L1,L2,L3`.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,

    /// Mode-1 components used for selection (1-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<usize>>,

    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,

    /// Adjusted P-value threshold.
    #[arg(long)]
    pub threshold: Option<f64>,

    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,

    /// Prior precision of the factor rows.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Tensor data file (`T3` format).
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Data file (`T3` tensor or `M2` matrix).
    #[arg(long)]
    pub data: PathBuf,

    /// Model written by `decompose`; fitted on the fly when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Selection CSV written by `select`.
    #[arg(long)]
    pub selection: PathBuf,

    /// Truth CSV written by `generate`.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Number of members (overrides the configuration).
    #[arg(long)]
    pub ensembles: Option<usize>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Data file the selection was made from.
    #[arg(long)]
    pub data: PathBuf,

    /// Selection CSV written by `select`.
    #[arg(long)]
    pub selection: PathBuf,

    /// Model written by `decompose` (tensor data only).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Truth CSV, added as a label column when given.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Number of leading components written for matrix data.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
}
