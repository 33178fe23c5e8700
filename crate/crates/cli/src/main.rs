mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgbench::eval::Task;

/// Build and evaluate fine-grained image-text retrieval benchmarks.
#[derive(Debug, Parser)]
#[command(name = "fgbench", version)]
pub struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true, env = "FGBENCH_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    T2i,
    I2t,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::T2i => Task::T2i,
            TaskArg::I2t => Task::I2t,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset manifest or a single file against its format.
    Validate(ValidateArgs),
    /// Search similar-image sets for every target and assemble the new pool.
    BuildPool(BuildPoolArgs),
    /// Label captions coarse or fine from a caption-to-image score matrix.
    DetectCoarse(DetectCoarseArgs),
    /// Emit prompted generator inputs for coarse captions.
    MakePrompts(MakePromptsArgs),
    /// Write scorer requests for captions, generated candidates or merged texts.
    ScoreRequests(ScoreRequestsArgs),
    /// Pair generated details with captions and drop those scoring below the original.
    Filter(FilterArgs),
    /// Attach merged texts, filter again and keep the best candidate per caption.
    SelectBest(SelectBestArgs),
    /// Build merge-training pairs from annotated captions.
    SplitMergeData(SplitMergeArgs),
    /// Manual review queue.
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Recall@K of a score matrix.
    Evaluate(EvaluateArgs),
    /// Sampled queries against the full pool and against per-query similar candidates.
    MiniTest(MiniTestArgs),
    /// Recall@K under two equal-size candidate pools.
    ComparePools(ComparePoolsArgs),
    /// Accuracy of choosing the correct text over a near-miss for each image.
    PairsEval(PairsEvalArgs),
    /// Noun, adjective and length statistics of annotated captions.
    Stats(StatsArgs),
    /// Deterministic bag-of-words embeddings for fixtures.
    MockEmbed(MockEmbedArgs),
    /// Score texts against images with the mock embedder.
    MockScore(MockScoreArgs),
    /// Merge two-sentence candidates with the template merger.
    MockMerge(MockMergeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// FGE1 embedding file; its ids are read from `<file>.ids`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub review: Option<PathBuf>,
    /// Prompted-input JSONL.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Generated-detail JSONL.
    #[arg(long)]
    pub generations: Option<PathBuf>,
    /// Compatibility-score JSONL.
    #[arg(long)]
    pub clipscores: Option<PathBuf>,
    /// Merged-text JSONL.
    #[arg(long)]
    pub merges: Option<PathBuf>,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildPoolArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub k_prime: usize,
    #[arg(long, default_value_t = 30)]
    pub k_dprime: usize,
    #[arg(long, default_value_t = 60)]
    pub rrf_constant: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectCoarseArgs {
    /// Caption × image score matrix.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakePromptsArgs {
    #[arg(long)]
    pub captions: PathBuf,
    /// Labels from detect-coarse; only coarse captions are prompted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreRequestsArgs {
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub generations: Option<PathBuf>,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub merged: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub generations: PathBuf,
    #[arg(long)]
    pub original_scores: PathBuf,
    /// Scores of the combined texts, line-aligned with the generations.
    #[arg(long)]
    pub candidate_scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectBestArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub merged: PathBuf,
    #[arg(long)]
    pub merged_scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitMergeArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Write selections as pending review items.
    Export {
        #[arg(long)]
        selections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a fully reviewed queue to the caption file.
    Apply {
        #[arg(long)]
        queue: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalCommon {
    #[arg(long)]
    pub scores: PathBuf,
    /// JSON object mapping each query id to a truth id or list of ids.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub ks: Vec<usize>,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    #[arg(long, default_value = "full")]
    pub pool_label: String,
}

#[derive(Debug, Args)]
pub struct MiniTestArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// JSON object mapping each query id to its 100 candidate ids.
    #[arg(long)]
    pub similar: PathBuf,
    /// JSON list of query ids; drawn with --seed when omitted.
    #[arg(long)]
    pub sample: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComparePoolsArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// JSON list of candidate ids.
    #[arg(long)]
    pub pool_a: PathBuf,
    #[arg(long)]
    pub pool_b: PathBuf,
    #[arg(long, default_value = "a")]
    pub label_a: String,
    #[arg(long, default_value = "b")]
    pub label_b: String,
}

#[derive(Debug, Args)]
pub struct PairsEvalArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MockEmbedArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long)]
    pub out_texts: PathBuf,
    /// Image embeddings: mean of each image's caption embeddings plus noise.
    #[arg(long)]
    pub out_images: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub image_noise: f32,
    #[arg(long)]
    pub out_aux: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub aux_count: usize,
}

#[derive(Debug, Args)]
pub struct MockScoreArgs {
    /// Scorer requests JSONL.
    #[arg(long)]
    pub requests: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MockMergeArgs {
    /// Merge requests JSONL (candidate files are accepted as-is).
    #[arg(long)]
    pub requests: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command, cli.seed) {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::ValidationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
