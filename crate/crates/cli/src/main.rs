//! `corpus-mixer`: corpus statistics, mixture sampling, surrogate fitting,
//! mixture search and token-budgeted selection from the command line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use corpus_mixer::pipeline::PipelineConfig;

#[derive(Parser, Debug)]
#[command(
    name = "corpus-mixer",
    version,
    about = "Domain mixture tooling for pretraining corpora"
)]
struct Cli {
    /// Pipeline settings file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the effective settings as JSON and exit.
    #[arg(long)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Composition report of a corpus.
    Stats(StatsArgs),
    /// Draw configuration mixtures around a tempered corpus prior.
    SampleMixtures(SampleArgs),
    /// Fit a boosted-tree surrogate for one target.
    Fit(FitArgs),
    /// Search for the mixture minimizing the surrogate loss.
    Search(SearchArgs),
    /// Materialize a mixture as a token-budgeted document manifest.
    Select(SelectArgs),
    /// Measure the domain mixture of a selection.
    Implicit(ImplicitArgs),
    /// k-means over document embeddings.
    Cluster(ClusterArgs),
    /// Synthetic corpora and mixing laws.
    #[command(subcommand)]
    Lab(LabCommand),
    /// Topic × format mixture filled with the best documents of every cell.
    Compose(ComposeArgs),
}

#[derive(Subcommand, Debug)]
enum LabCommand {
    /// Write a synthetic corpus (and optionally embeddings).
    Generate(LabGenerateArgs),
    /// Evaluate planted laws, fit surrogates, search and score the result.
    Regmix(Box<LabRegmixArgs>),
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Corpus JSONL files or glob patterns.
    #[arg(long = "input", value_name = "GLOB")]
    pub input: Vec<String>,
    /// Cluster taxonomy size, when records carry cluster ids.
    #[arg(long, value_name = "K")]
    pub clusters: Option<usize>,
    /// Count and skip malformed lines instead of failing.
    #[arg(long)]
    pub skip_malformed: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum WeightingArg {
    Tokens,
    Documents,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Keep counts only.
    #[arg(long)]
    pub stats_only: bool,
    /// Also write domain proportions under `--taxonomy` as a mixture file.
    #[arg(long, value_name = "FILE", requires = "taxonomy")]
    pub proportions: Option<PathBuf>,
    #[arg(long, value_name = "SPEC")]
    pub taxonomy: Option<String>,
}

#[derive(Args, Debug)]
pub struct PriorArgs {
    /// Corpus proportions as a mixture file.
    #[arg(long = "corpus-proportions", alias = "prior", value_name = "FILE")]
    pub proportions: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Taxonomy for proportions measured from `--input`.
    #[arg(long, value_name = "SPEC")]
    pub taxonomy: Option<String>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub log_alpha_low: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub log_alpha_high: Option<f64>,
    /// Maximum ratio to the corpus proportions.
    #[arg(long)]
    pub cap: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GbtArgs {
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_name = "FILE")]
    pub observations: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Hold out the last K observations and report their rank correlation.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub holdout: usize,
    #[command(flatten)]
    pub gbt: GbtArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SearchParamArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub cap: Option<f64>,
    #[arg(long)]
    pub line_search_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub log_alpha_low: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub log_alpha_high: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Surrogate model; repeat to average several targets.
    #[arg(long, value_name = "FILE", required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub model2: Option<PathBuf>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub params: SearchParamArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ModeArg {
    Random,
    Quality,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub mixture: PathBuf,
    #[arg(long)]
    pub budget: u64,
    #[arg(long, value_enum, default_value = "random")]
    pub mode: ModeArg,
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Make the mixture feasible against per-domain availability first.
    #[arg(long)]
    pub redistribute: bool,
    /// Set aside this share of corpus tokens before selecting.
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImplicitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Selection manifest JSONL; the whole corpus when omitted.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_name = "SPEC")]
    pub taxonomy: String,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub ids: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub no_normalize: bool,
    /// Corpus used to report cluster agreement with topics and formats.
    #[arg(long = "input", value_name = "GLOB")]
    pub input: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub assignments: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LabGenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE", requires = "ids_out")]
    pub embeddings_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub ids_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LabRegmixArgs {
    /// Planted law; the file stem names the target.
    #[arg(long, value_name = "FILE", required = true)]
    pub law: Vec<PathBuf>,
    /// Output directory of `sample-mixtures`.
    #[arg(long, value_name = "DIR")]
    pub mixtures: PathBuf,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[command(flatten)]
    pub gbt: GbtArgs,
    #[command(flatten)]
    pub search: SearchParamArgs,
    /// Seed of the law noise.
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub observations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub topic_mixture: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub format_mixture: PathBuf,
    #[arg(long)]
    pub score: String,
    #[arg(long)]
    pub budget: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CORPUS_MIXER_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("CORPUS_MIXER_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => PipelineConfig::from_json_str(&io::read_text(p)?)
            .with_context(|| format!("loading settings from {}", p.display())),
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = load_config(cli.config.as_ref())?;
    if cli.dump_config {
        println!("{}", cfg.to_json_string());
        return Ok(());
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no subcommand given; see --help");
    };
    match command {
        Command::Stats(a) => commands::stats(&cfg, a),
        Command::SampleMixtures(a) => commands::sample_mixtures(&cfg, a),
        Command::Fit(a) => commands::fit(&cfg, a),
        Command::Search(a) => commands::search(&cfg, a),
        Command::Select(a) => commands::select(a),
        Command::Implicit(a) => commands::implicit(a),
        Command::Cluster(a) => commands::cluster(&cfg, a),
        Command::Lab(LabCommand::Generate(a)) => commands::lab_generate(a),
        Command::Lab(LabCommand::Regmix(a)) => commands::lab_regmix(&cfg, *a),
        Command::Compose(a) => commands::compose(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            let msg = serde_json::json!({ "error": e.to_string(), "causes": causes });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
