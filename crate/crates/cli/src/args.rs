//! Command-line surface.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mscbench",
    version,
    about = "MSC 2020 classification benchmark pipeline"
)]
pub struct Cli {
    /// Store directory holding runs and caches.
    #[arg(
        long,
        global = true,
        env = "MSCBENCH_STORE",
        default_value = "mscbench-store"
    )]
    pub store: PathBuf,

    /// Code list to use instead of the bundled one.
    #[arg(long, global = true, env = "MSCBENCH_TAXONOMY")]
    pub taxonomy: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect the MSC 2020 code list.
    #[command(subcommand)]
    Taxonomy(TaxonomyCommand),
    /// Print level counts of the code list (same as `taxonomy stats`).
    #[command(name = "taxonomy-stats")]
    TaxonomyStats,
    /// Sample the latest arXiv preprint per top-level class into a new run.
    Sample(SampleArgs),
    /// Ask a chat model to classify every sampled item.
    Classify(ClassifyArgs),
    /// Compare classifications with arXiv ground truth.
    Evaluate(EvaluateArgs),
    /// Render an evaluated run as markdown or CSV.
    Report(ReportArgs),
    /// List runs in the store.
    Runs,
    /// Human review of differing rows.
    #[command(subcommand)]
    Review(ReviewCommand),
}

#[derive(Debug, Subcommand)]
pub enum TaxonomyCommand {
    /// Print "top / second / third" level counts.
    Stats,
    /// Validate codes and show their descriptions.
    Check {
        #[arg(required = true)]
        codes: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Newest submission date to consider (inclusive, UTC).
    #[arg(long, default_value = "2024-04-02")]
    pub cutoff: NaiveDate,

    /// Top-level classes to skip.
    #[arg(long, value_delimiter = ',', default_value = "97")]
    pub exclude: Vec<String>,

    /// Sample only these top-level classes.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,

    /// Serve arXiv responses from the store cache only.
    #[arg(long)]
    pub offline: bool,

    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,

    /// Results requested per class query.
    #[arg(long, default_value_t = 50)]
    pub max_results: usize,

    /// Directory of `<arxiv id>.txt` files replacing the metadata abstract.
    #[arg(long)]
    pub user_text: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// OpenAI-compatible chat completion endpoint.
    Http,
    /// Cached transcripts only.
    Replay,
    /// Scripted replies from a JSON file.
    Mock,
}

impl ProviderKind {
    pub fn name(self) -> &'static str {
        match self {
            ProviderKind::Http => "http",
            ProviderKind::Replay => "replay",
            ProviderKind::Mock => "mock",
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Run to classify (defaults to the latest).
    #[arg(long)]
    pub run: Option<String>,

    #[arg(long, value_enum, default_value = "http")]
    pub provider: ProviderKind,

    /// Model name; the mock provider takes it from its script.
    #[arg(long, default_value = "gpt-3.5-turbo")]
    pub model: String,

    #[arg(long, env = "MSCBENCH_CHAT_ENDPOINT", default_value = mscbench_core::classifier::DEFAULT_ENDPOINT)]
    pub endpoint: String,

    /// Environment variable holding the API key.
    #[arg(long, default_value = mscbench_core::classifier::DEFAULT_KEY_ENV)]
    pub api_key_env: String,

    /// Reply script for the mock provider.
    #[arg(long, required_if_eq("provider", "mock"))]
    pub mock_script: Option<PathBuf>,

    /// Also ask for additional relevant areas.
    #[arg(long)]
    pub broaden: bool,

    /// Classify all items in one continuing conversation.
    #[arg(long)]
    pub session: bool,

    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,

    /// Reply cue lists (JSON) replacing the built-in ones.
    #[arg(long)]
    pub cues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run to evaluate (defaults to the latest).
    #[arg(long, conflicts_with = "fixture")]
    pub run: Option<String>,

    /// Replay a fixture into a new run; without a path the bundled one.
    #[arg(long, num_args = 0..=1, default_missing_value = "builtin")]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Md,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run to report (defaults to the latest).
    #[arg(long)]
    pub run: Option<String>,

    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,

    /// Write here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Serve the review API and UI assets.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,

    #[arg(long, default_value_t = 8080)]
    pub port: u16,

    /// Environment variable holding a bearer token required by the API.
    #[arg(long)]
    pub auth_token_env: Option<String>,

    /// Directory of built UI assets.
    #[arg(long, env = "MSCBENCH_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}
