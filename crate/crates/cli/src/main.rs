use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Parser)]
#[command(
    name = "topicpref",
    version,
    about = "Mine stances from a corpus and model user-topic preferences"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or generate corpus files
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Harvest or check stance patterns
    #[command(subcommand)]
    Patterns(PatternsCmd),
    /// Extract preference instances and build the preference matrix
    Extract(ExtractArgs),
    /// Factorize a preference matrix into user and topic vectors
    Train(TrainArgs),
    /// RMSE of a model over the known cells of a matrix
    Rmse(RmseArgs),
    /// Evaluate predictions and rank statistics
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Query the topic space of a model
    #[command(subcommand)]
    Topics(TopicsCmd),
    /// Per-user reports
    #[command(subcommand)]
    User(UserCmd),
    /// Run corpus, patterns, extract, train and eval from a config file
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Count tweets, users, retweets and malformed lines
    Stats {
        /// Corpus file
        path: PathBuf,
        /// Keep retweets instead of dropping them
        #[arg(long)]
        keep_retweets: bool,
    },
    /// Generate a synthetic corpus with planted low-rank preferences
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of users
    #[arg(long, default_value_t = 500)]
    users: usize,
    /// Number of topics
    #[arg(long, default_value_t = 50)]
    topics: usize,
    /// Rank of the planted preference structure
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Probability that a user states a preference on a topic
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Per-statement probability of flipping the polarity
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fewest stance statements per observed cell
    #[arg(long, default_value_t = 1)]
    min_statements: u32,
    /// Most stance statements per observed cell
    #[arg(long, default_value_t = 3)]
    max_statements: u32,
    /// Per-cell probability of an extra pro/con hashtag tweet
    #[arg(long, default_value_t = 0.25)]
    hashtag_rate: f64,
    /// Per-cell probability of an extra stance-free mention
    #[arg(long, default_value_t = 0.2)]
    neutral_rate: f64,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corpus output file
    #[arg(long)]
    out: PathBuf,
    /// Planted polarities, one `user<TAB>topic<TAB>+1|-1` row per observed cell [default: not written]
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Hashtag rules matching the generated tags [default: not written]
    #[arg(long)]
    rules_out: Option<PathBuf>,
    /// Curated patterns matching the generated statements [default: not written]
    #[arg(long)]
    patterns_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PatternsCmd {
    /// Rank candidate patterns around hashtag-declared topics
    Harvest(HarvestArgs),
    /// Load a curated pattern file and list its patterns
    Load {
        /// Curated pattern file
        path: PathBuf,
        /// Only validate and print counts
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct HarvestArgs {
    /// Corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Hashtag rules, `polarity<TAB>regex` per line
    #[arg(long)]
    rules: PathBuf,
    /// Candidate pattern output file
    #[arg(long)]
    out: PathBuf,
    /// Number of candidates kept
    #[arg(long, default_value_t = 1000)]
    top_n: usize,
    /// Tokens kept before the topic keyword
    #[arg(long, default_value_t = topicpref::patterns::DEFAULT_WINDOW)]
    window: usize,
    /// Topic vocabulary output file [default: not written]
    #[arg(long)]
    topics_out: Option<PathBuf>,
    /// Keep retweets instead of dropping them
    #[arg(long)]
    keep_retweets: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Curated pattern file
    #[arg(long)]
    patterns: PathBuf,
    /// Topic vocabulary, one topic per line
    #[arg(long)]
    topics: PathBuf,
    /// Users and topics with fewer instances are dropped
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    /// Topics removed after frequency filtering [default: none]
    #[arg(long)]
    stop_topics: Option<PathBuf>,
    /// Output directory for instances and matrix files
    #[arg(long)]
    out: PathBuf,
    /// Keep retweets instead of dropping them
    #[arg(long)]
    keep_retweets: bool,
}

#[derive(Args, Clone)]
struct TrainParams {
    /// Latent dimension
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Regularization on user vectors
    #[arg(long, default_value_t = 0.1)]
    lp: f64,
    /// Regularization on topic vectors
    #[arg(long, default_value_t = 0.1)]
    lq: f64,
    /// Learning rate
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Passes over the known cells
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training threads
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl TrainParams {
    fn config(&self) -> topicpref::TrainConfig {
        topicpref::TrainConfig {
            k: self.k,
            lambda_p: self.lp,
            lambda_q: self.lq,
            learning_rate: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Matrix directory
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    params: TrainParams,
    /// Model output file
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training RMSE output [default: not written]
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct RmseArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Matrix directory
    #[arg(long)]
    matrix: PathBuf,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Hold out known cells, train on the rest and score sign predictions
    Holdout(HoldoutArgs),
    /// Rank correlation between topic cosines and human judgements
    Spearman {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// `topic_a<TAB>topic_b<TAB>score` rows
        #[arg(long)]
        judgements: PathBuf,
    },
    /// Mean per-user variance of known preferences
    Variance {
        /// Matrix directory
        #[arg(long)]
        matrix: PathBuf,
        /// Comma-separated thresholds on known cells per user
        #[arg(long, default_value = "0,5,10,30,100", value_delimiter = ',')]
        thetas: Vec<usize>,
    },
}

#[derive(Args)]
struct HoldoutArgs {
    /// Matrix directory
    #[arg(long)]
    matrix: PathBuf,
    /// Fraction of known cells held out
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    #[command(flatten)]
    params: TrainParams,
    /// Comma-separated thresholds on known training cells per user
    #[arg(long, default_value = "0,5,10,30,100", value_delimiter = ',')]
    thetas: Vec<usize>,
    /// Report output file [default: stdout only]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TopicsCmd {
    /// Topics with the most similar vectors
    Near {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Query topic
        #[arg(long)]
        topic: String,
        /// Number of neighbours
        #[arg(short = 'n', long = "n", default_value_t = 10)]
        n: usize,
        /// Print tab-separated rows instead of a table
        #[arg(long)]
        tsv: bool,
    },
    /// Sample topic pairs per cosine band
    Pairs {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated `low:high` cosine bands
        #[arg(
            long,
            default_value = "-1:-0.6,-0.6:0.6,0.6:1",
            allow_hyphen_values = true
        )]
        bands: String,
        /// Pairs drawn per band
        #[arg(long, default_value_t = 150)]
        per_band: usize,
        /// Random seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tab-separated output file [default: stdout only]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print tab-separated rows instead of a table
        #[arg(long)]
        tsv: bool,
    },
}

#[derive(Subcommand)]
enum UserCmd {
    /// Declared and predicted preferences of one user
    Report {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Matrix directory
        #[arg(long)]
        matrix: PathBuf,
        /// User id
        #[arg(long)]
        user: String,
        /// Entries per list
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        /// Print tab-separated rows instead of a table
        #[arg(long)]
        tsv: bool,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat `key = value` config; relative paths resolve against its directory
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: `out` from the config]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed [default: `seed` from the config, else 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Latent dimension [default: `k` from the config, else 100]
    #[arg(long)]
    k: Option<usize>,
    /// Passes over the known cells [default: `epochs` from the config, else 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [default: `lr` from the config, else 0.05]
    #[arg(long)]
    lr: Option<f64>,
    /// Training threads [default: `workers` from the config, else 1]
    #[arg(long)]
    workers: Option<usize>,
    /// Minimum instances per user and topic [default: `min_count` from the config, else 5]
    #[arg(long)]
    min_count: Option<usize>,
}

/// A failed stage and its cause.
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

pub type StageResult<T> = Result<T, StageError>;

pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

fn run(cli: Cli) -> StageResult<()> {
    match cli.command {
        Command::Corpus(CorpusCmd::Stats {
            path,
            keep_retweets,
        }) => commands::corpus_stats(&path, keep_retweets),
        Command::Corpus(CorpusCmd::Synth(a)) => commands::synth(&a),
        Command::Patterns(PatternsCmd::Harvest(a)) => commands::harvest(&a),
        Command::Patterns(PatternsCmd::Load { path, check }) => {
            commands::load_patterns(&path, check)
        }
        Command::Extract(a) => commands::extract(&a),
        Command::Train(a) => commands::train(&a),
        Command::Rmse(a) => commands::rmse(&a),
        Command::Eval(EvalCmd::Holdout(a)) => commands::holdout(&a),
        Command::Eval(EvalCmd::Spearman { model, judgements }) => {
            commands::spearman(&model, &judgements)
        }
        Command::Eval(EvalCmd::Variance { matrix, thetas }) => commands::variance(&matrix, &thetas),
        Command::Topics(TopicsCmd::Near {
            model,
            topic,
            n,
            tsv,
        }) => commands::near(&model, &topic, n, tsv),
        Command::Topics(TopicsCmd::Pairs {
            model,
            bands,
            per_band,
            seed,
            out,
            tsv,
        }) => commands::pairs(&model, &bands, per_band, seed, out.as_deref(), tsv),
        Command::User(UserCmd::Report {
            model,
            matrix,
            user,
            top_n,
            tsv,
        }) => commands::user_report(&model, &matrix, &user, top_n, tsv),
        Command::Pipeline(a) => config::run_pipeline(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{:#}", e.source).replace(['\t', '\n', '\r'], " ");
            eprintln!("error\tstage={}\t{message}", e.stage);
            ExitCode::from(1)
        }
    }
}
