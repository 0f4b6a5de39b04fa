//! `rqa`: synthesize corpora, build embedding tables, train, cross-validate,
//! score, and evaluate resume quality models.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rqa_core::ErrorClass;

#[derive(Debug, Parser)]
#[command(name = "rqa", version, about = "Resume quality assessment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled/unlabeled corpus.
    Synth(SynthArgs),
    /// Write an embedding table covering every text in a corpus.
    Embed(EmbedArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Repeated 5-fold cross-validation with grid search.
    Cv(CvArgs),
    /// Score every resume in a corpus.
    Score(ScoreArgs),
    /// Compute AUC, F1 and AP for a score file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub pos: usize,
    #[arg(long)]
    pub neg: usize,
    #[arg(long)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Existing table whose vectors take precedence over the fallback.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Defaults to `<model-out>.history.csv`.
    #[arg(long)]
    pub history_out: Option<PathBuf>,
    /// Comma-separated training ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "auto_split")]
    pub train_ids: Vec<String>,
    /// Comma-separated validation ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "auto_split")]
    pub val_ids: Vec<String>,
    /// Hold out fold 0 of a seeded 5-fold plan, validate on fold 1 and
    /// train on the rest.
    #[arg(long)]
    pub auto_split: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub shuffles: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-shuffle ROC files; defaults to the report's directory.
    #[arg(long)]
    pub roc_dir: Option<PathBuf>,
    /// Worker threads for independent (shuffle, fold) cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Embed(a) => commands::embed(a),
        Command::Train(a) => commands::train(a),
        Command::Cv(a) => commands::cv(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Protocol => EXIT_PROTOCOL,
            })
        }
    }
}
