//! `binn`: synthesize data, fit normalizers, train, evaluate and predict.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use binn_core::{Error as CoreError, KeyValues};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_config() => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "binn", version, about = "Hierarchical video classification with BINN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic hierarchy with train and validation shards.
    Synth(SynthArgs),
    /// Fit normalization statistics on a training shard.
    FitNorm(RunArgs),
    /// Train a BINN or the logistic baseline.
    Train(TrainArgs),
    /// Score a shard and write per-layer metric reports.
    Evaluate(EvalArgs),
    /// Write the top-k labels of every video and layer.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `key = value` generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for vocab.txt, train.hlvs and val.hlvs.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Run settings shared by `fit-norm` and `train`; flags override the file.
#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["binn", "logreg"])]
    pub model: Option<String>,
    #[arg(long, value_parser = ["rgb", "rgb+audio"])]
    pub features: Option<String>,
    #[arg(long, value_parser = ["znorm", "pca"])]
    pub norm: Option<String>,
    #[arg(long, overrides_with = "no_l2")]
    pub l2: bool,
    #[arg(long = "no-l2", overrides_with = "l2")]
    pub no_l2: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<u64>,
    #[arg(long)]
    pub decay_factor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Checkpoint (train) or normalizer (fit-norm) output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// The config file overlaid with every flag that was given.
    pub fn key_values(&self) -> CliResult<KeyValues> {
        let mut kv = match &self.config {
            Some(p) => KeyValues::load(p)?,
            None => KeyValues::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.set(k, v);
            }
        };
        set("model", self.model.clone());
        set("features", self.features.clone());
        set("norm", self.norm.clone());
        set("l2", self.l2.then(|| "true".into()));
        set("l2", self.no_l2.then(|| "false".into()));
        set("lr", self.lr.map(|v| v.to_string()));
        set("iters", self.iters.map(|v| v.to_string()));
        set("batch_size", self.batch_size.map(|v| v.to_string()));
        set("weight_decay", self.weight_decay.map(|v| v.to_string()));
        set("decay_every", self.decay_every.map(|v| v.to_string()));
        set("decay_factor", self.decay_factor.map(|v| v.to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        set("vocab", path(&self.vocab));
        set("train", path(&self.train));
        set("val", path(&self.val));
        set("out", path(&self.out));
        Ok(kv)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Normalizer written by `fit-norm`; fitted on the training shard when
    /// absent.
    #[arg(long)]
    pub normalizer: Option<PathBuf>,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub shard: PathBuf,
    /// Vocabulary to check the checkpoint against; the embedded one is used
    /// otherwise.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Per-video cutoff for gAP.
    #[arg(long, default_value_t = binn_core::metrics::DEFAULT_GAP_TOP_K)]
    pub top_k: usize,
    /// Report prefix; writes `<out>.txt` and `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub shard: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::FitNorm(a) => commands::fit_norm(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Predict(a) => commands::predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
