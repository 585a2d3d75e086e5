//! Command-line entry point: run simulations, the three-variant ablation,
//! corpus index builds and post-hoc analysis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::{info, warn};
use tracing_subscriber::EnvFilter;

use delivery_sim::cognition::{LlmConfig, RoleLibrary};
use delivery_sim::config::{ConfigError, ENV_PREFIX, FIELD_DOCS};
use delivery_sim::corpus::{ClusterOptions, DistanceMetric, EmbedderSpec, Sampling, FALLBACK_DIM};
use delivery_sim::harness::{self, BackendChoice, HarnessError, RunOptions};
use delivery_sim::metrics::{self, EmotionFilter, MetricsError, ReportOptions};
use delivery_sim::{validate_config, FrameworkVariant, SimConfig, ValidConfig};

fn config_help() -> String {
    let mut s = String::from("Configuration fields (set with --set FIELD=VALUE or the environment variable ");
    s.push_str(ENV_PREFIX);
    s.push_str("<FIELD in upper case>; flags override the environment, which overrides the file or preset):\n");
    for (field, doc) in FIELD_DOCS {
        s.push_str(&format!("  {field:<24} {doc}\n"));
    }
    s.push_str("\nExit codes: 0 success, 1 configuration or input error, 2 simulation invariant violated, 3 I/O error.");
    s
}

#[derive(Parser)]
#[command(name = "delivery-sim", version, about = "Food-delivery simulation with emotion-driven rider agents")]
#[command(after_long_help = config_help())]
struct Cli {
    /// Log filter, e.g. `info` or `delivery_sim=debug`. RUST_LOG wins when set.
    #[arg(long, global = true, default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its run directory.
    #[command(after_long_help = config_help())]
    Run(RunArgs),
    /// Run all three framework variants on the same seed and order stream.
    #[command(after_long_help = config_help())]
    Ablation(AblationArgs),
    /// Cluster an emotion corpus and write the index used for role examples.
    Index(IndexArgs),
    /// Write report files for a finished run directory.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Built-in preset used when no --config is given.
    #[arg(long, default_value = "paper-main", value_parser = ["paper-main", "paper-appendix"])]
    preset: String,

    /// TOML config file; replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Override any scalar config field; repeatable.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    set: Vec<String>,

    /// Ignore DSIM_* environment overrides.
    #[arg(long)]
    no_env: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Rule,
    Llm,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "rule")]
    backend: BackendKind,

    /// Chat-completion endpoint for --backend llm.
    #[arg(long, default_value = "http://127.0.0.1:8000/v1/chat/completions")]
    llm_endpoint: String,

    #[arg(long, default_value = "default")]
    llm_model: String,

    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "DSIM_LLM_TOKEN")]
    llm_token_env: String,

    #[arg(long, default_value_t = 30_000)]
    llm_timeout_ms: u64,

    /// Corpus index from `delivery-sim index`, used by emotion-aligned riders.
    #[arg(long)]
    corpus_index: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Traditional,
    EmotionPerceived,
    EmotionAligned,
}

impl From<VariantArg> for FrameworkVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Traditional => FrameworkVariant::Traditional,
            VariantArg::EmotionPerceived => FrameworkVariant::EmotionPerceived,
            VariantArg::EmotionAligned => FrameworkVariant::EmotionAligned,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,

    #[command(flatten)]
    backend: BackendArgs,

    #[arg(long, value_enum)]
    variant: Option<VariantArg>,

    /// Parent directory; the run lands in OUT/<run id>.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct AblationArgs {
    #[command(flatten)]
    config: ConfigArgs,

    #[command(flatten)]
    backend: BackendArgs,

    /// Directory receiving one sub-directory per variant and comparison.csv.
    #[arg(long, default_value = "runs/ablation")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedKind {
    Fallback,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Farthest,
    Nearest,
}

#[derive(Args)]
struct IndexArgs {
    /// JSONL corpus file.
    #[arg(long)]
    corpus: PathBuf,

    /// Clusters per emotion.
    #[arg(long, default_value_t = 3)]
    k: usize,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    #[arg(long, value_enum, default_value = "fallback")]
    embedder: EmbedKind,

    /// Vector size of the fallback embedder.
    #[arg(long, default_value_t = FALLBACK_DIM)]
    embed_dim: usize,

    /// Endpoint of a remote embedding service.
    #[arg(long)]
    embed_endpoint: Option<String>,

    #[arg(long)]
    embed_token_env: Option<String>,

    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,

    /// Which members of a cluster become role examples.
    #[arg(long, value_enum, default_value = "farthest")]
    sampling: SamplingArg,

    #[arg(long, default_value = "corpus-index.json")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    run_dir: PathBuf,

    /// Which events the emotion histogram counts.
    #[arg(long, default_value = "at-acceptance", value_parser = ["at-acceptance", "at-rejection", "all-ticks"])]
    filter: String,

    /// Count fallback rejections as genuine decisions.
    #[arg(long)]
    include_incidents: bool,

    /// Heatmap cell size in map cells.
    #[arg(long, default_value_t = 1)]
    downsample: u32,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Io { .. }) { 3 } else { 1 };
        Failure { code, error: e.into() }
    }
}

fn input_error(e: anyhow::Error) -> Failure {
    Failure { code: 1, error: e }
}

fn resolve_config(args: &ConfigArgs, variant: Option<FrameworkVariant>) -> Result<(String, ValidConfig), Failure> {
    let (label, mut cfg) = match &args.config {
        Some(path) => {
            let stem = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
            (stem, SimConfig::from_file(path)?)
        }
        None => (args.preset.clone(), SimConfig::preset(&args.preset)?),
    };
    if !args.no_env {
        for field in cfg.apply_env_overrides()? {
            info!(field, "config field overridden from environment");
        }
    }
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    if let Some(v) = variant {
        cfg.framework_variant = v;
    }
    for assignment in &args.set {
        let (field, value) = assignment
            .split_once('=')
            .ok_or_else(|| input_error(anyhow::anyhow!("--set expects FIELD=VALUE, got `{assignment}`")))?;
        cfg.set_field(field.trim(), value.trim())?;
    }
    Ok((label, validate_config(cfg)?))
}

fn backend_choice(args: &BackendArgs) -> BackendChoice {
    match args.backend {
        BackendKind::Rule => BackendChoice::Rule,
        BackendKind::Llm => BackendChoice::Llm(LlmConfig {
            endpoint: args.llm_endpoint.clone(),
            model: args.llm_model.clone(),
            token_env: Some(args.llm_token_env.clone()),
            timeout_ms: args.llm_timeout_ms,
            ..LlmConfig::default()
        }),
    }
}

fn load_library(path: Option<&Path>) -> Result<Option<RoleLibrary>, Failure> {
    path.map(|p| harness::load_library(p).map_err(Failure::from)).transpose()
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let (label, cfg) = resolve_config(&args.config, args.variant.map(Into::into))?;
    let library = load_library(args.backend.corpus_index.as_deref())?;
    let config_hash = cfg.hash()?;
    let dir = args.out.join(harness::run_id(&label, &cfg, &config_hash));
    let opts = RunOptions {
        label,
        backend: backend_choice(&args.backend),
        library: library.as_ref(),
        corpus_index: args.backend.corpus_index.clone(),
    };
    let outcome = harness::run_simulation(cfg, &dir, &opts)?;
    println!("{}", outcome.dir.display());
    Ok(())
}

fn cmd_ablation(args: AblationArgs) -> Result<(), Failure> {
    let (label, cfg) = resolve_config(&args.config, None)?;
    let library = load_library(args.backend.corpus_index.as_deref())?;
    let opts = RunOptions {
        label,
        backend: backend_choice(&args.backend),
        library: library.as_ref(),
        corpus_index: args.backend.corpus_index.clone(),
    };
    let outcome = harness::run_ablation(cfg.into_inner(), &args.out, &opts)?;
    for run in &outcome.runs {
        println!("{}", run.dir.display());
    }
    println!("{}", args.out.join("comparison.csv").display());
    Ok(())
}

fn cmd_index(args: IndexArgs) -> Result<(), Failure> {
    let spec = match args.embedder {
        EmbedKind::Fallback => EmbedderSpec::Fallback {
            dim: args.embed_dim,
            seed: 0,
        },
        EmbedKind::Remote => EmbedderSpec::Remote {
            endpoint: args
                .embed_endpoint
                .clone()
                .ok_or_else(|| input_error(anyhow::anyhow!("--embedder remote needs --embed-endpoint")))?,
            token_env: args.embed_token_env.clone(),
            timeout_ms: 30_000,
        },
    };
    let opts = ClusterOptions {
        metric: match args.metric {
            MetricArg::Euclidean => DistanceMetric::Euclidean,
            MetricArg::Cosine => DistanceMetric::Cosine,
        },
        sampling: match args.sampling {
            SamplingArg::Farthest => Sampling::Farthest,
            SamplingArg::Nearest => Sampling::Nearest,
        },
        ..ClusterOptions::default()
    };
    harness::build_index_file(&args.corpus, args.k, args.seed, &spec, &opts, &args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let filter: EmotionFilter = args.filter.parse().map_err(|e: String| input_error(anyhow::anyhow!(e)))?;
    let opts = ReportOptions {
        filter,
        include_incidents: args.include_incidents,
        downsample: args.downsample,
    };
    let summary = metrics::write_report(&args.run_dir, &opts).map_err(|e| {
        let code = match e {
            MetricsError::Io { .. } | MetricsError::Output { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            error: anyhow::Error::new(e).context(format!("analysing {}", args.run_dir.display())),
        }
    })?;
    if summary.orders_open > 0 {
        warn!(open = summary.orders_open, "orders were still in flight when the run ended");
    }
    for f in metrics::REPORT_FILES {
        println!("{}", args.run_dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(&cli.log));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ablation(a) => cmd_ablation(a),
        Command::Index(a) => cmd_index(a),
        Command::Analyze(a) => cmd_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
