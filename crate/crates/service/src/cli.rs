//! Command-line entry points. Exit codes: 0 success, 1 usage or
//! configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use skeptik_core::analysis::{hedged, AnalysisInput, Analyzer, Level};
use skeptik_core::gateway::{Gateway, MockProvider, OpenAiProvider, MOCK_PROVIDER_ID};
use skeptik_core::metrics::{load_corpus, render_table, run_study, StudyConfig, DEFAULT_ALPHA, DEFAULT_FOLDS};
use skeptik_core::taxonomy::{registry_default, FallacyRegistry};
use tokio::net::TcpListener;
use tracing::info;

use crate::api::{router, AppState};
use crate::config::{ServiceConfig, ENV_API_KEY};
use crate::fetch::HttpFetcher;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skeptik", version, about = "Flag possible logical fallacies in news articles")]
pub struct Cli {
    /// TOML configuration file; SKEPTIK_* environment variables override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze an article from a URL or a local HTML or text file.
    Analyze(AnalyzeArgs),
    /// Run the corpus study and write a JSON report.
    Metrics(MetricsArgs),
    /// Start the HTTP API.
    Serve,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// URL (http/https) or path to a local file.
    pub target: String,
    /// Print the canonical result as compact JSON.
    #[arg(long, conflicts_with = "pretty")]
    pub json: bool,
    /// Print the canonical result as indented JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV corpus file.
    pub corpus: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Register the mock provider plus the configured live provider, if any.
pub fn build_gateway(config: &ServiceConfig) -> anyhow::Result<Gateway> {
    let mut gateway = Gateway::new().with_provider(Arc::new(MockProvider::default()));
    if config.provider.id != MOCK_PROVIDER_ID {
        let key = config
            .api_key
            .clone()
            .ok_or_else(|| anyhow!("{ENV_API_KEY} must be set for provider {}", config.provider.id))?;
        gateway.register(Arc::new(OpenAiProvider::new(&config.provider.id, &config.provider.base_url, key)));
    }
    Ok(gateway)
}

pub fn load_registry(config: &ServiceConfig) -> anyhow::Result<FallacyRegistry> {
    match &config.registry_path {
        Some(path) => FallacyRegistry::load(path).with_context(|| format!("loading registry {}", path.display())),
        None => Ok(registry_default()),
    }
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    let mut config = match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    config.apply_process_env()?;
    config.validate()?;
    Ok(config)
}

fn input_for(target: &str) -> anyhow::Result<AnalysisInput> {
    if target.starts_with("http://") || target.starts_with("https://") {
        return Ok(AnalysisInput::Url(target.to_string()));
    }
    let path = Path::new(target);
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let looks_html = matches!(ext.as_str(), "html" | "htm" | "xhtml")
        || (ext != "txt" && text.trim_start().starts_with('<'));
    Ok(if looks_html {
        AnalysisInput::Html { html: text, url: None }
    } else {
        AnalysisInput::Text { text, url: None }
    })
}

async fn analyze(config: &ServiceConfig, args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let registry = load_registry(config).map_err(usage)?;
    let gateway = build_gateway(config).map_err(usage)?;
    let input = input_for(&args.target).map_err(runtime)?;
    let analyzer = Analyzer::new(gateway).with_fetcher(Arc::new(HttpFetcher::new(config.allow_http_fetch)));
    let analysis = analyzer
        .analyze(&input, &registry, &config.provider_config(), config.parse_mode)
        .await
        .map_err(runtime)?;
    let result = &analysis.result;
    if args.json {
        writeln!(out, "{}", result.to_canonical_json()).map_err(runtime)?;
    } else if args.pretty {
        writeln!(out, "{}", result.to_canonical_json_pretty()).map_err(runtime)?;
    } else {
        let title = if result.title.is_empty() { "(untitled)" } else { &result.title };
        writeln!(out, "{title}").map_err(runtime)?;
        writeln!(out, "{} sentences, {} possible fallacies", result.sentences.len(), result.detected.len())
            .map_err(runtime)?;
        for instance in &result.detected {
            let name = registry.get(&instance.code).map_or(instance.code.as_str(), |f| f.name.as_str());
            let sentences: Vec<String> = instance.sentence_indices.iter().map(|i| i.to_string()).collect();
            let explanation = instance.layer(Level::L1).map_or("", |l| l.explanation.as_str());
            writeln!(out, "\n[{}] sentences {}", instance.code, sentences.join(", ")).map_err(runtime)?;
            writeln!(out, "  {}", hedged(name, explanation)).map_err(runtime)?;
        }
    }
    Ok(())
}

async fn metrics(config: &ServiceConfig, args: &MetricsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if args.k < 2 {
        return Err(usage(anyhow!("--k must be at least 2")));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(anyhow!("--alpha must lie in (0, 1)")));
    }
    let registry = load_registry(config).map_err(usage)?;
    let mut records = load_corpus(&args.corpus, &registry).map_err(runtime)?;
    if records.iter().any(|r| r.analysis.is_none()) {
        let analyzer = Analyzer::new(build_gateway(config).map_err(usage)?);
        let provider = config.provider_config();
        for record in records.iter_mut().filter(|r| r.analysis.is_none()) {
            let text = record.text.clone().unwrap_or_default();
            let analysis = analyzer
                .analyze(&AnalysisInput::Text { text, url: None }, &registry, &provider, config.parse_mode)
                .await
                .with_context(|| format!("analyzing {}", record.article_id))
                .map_err(runtime)?;
            if record.word_count.is_none() {
                record.word_count = Some(analysis.article.word_count());
            }
            record.analysis = Some(analysis.result);
        }
    }
    let study = StudyConfig { alpha: args.alpha, k: args.k, seed: args.seed };
    let report = run_study(&records, &study).map_err(runtime)?;
    std::fs::write(&args.out, report.to_json_pretty() + "\n")
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(runtime)?;
    write!(out, "{}", render_table(&report)).map_err(runtime)?;
    Ok(())
}

async fn serve(config: &ServiceConfig) -> Result<(), Failure> {
    let registry = load_registry(config).map_err(usage)?;
    let gateway = build_gateway(config).map_err(usage)?;
    let state = AppState::new(config, registry, gateway).map_err(runtime)?;
    let addr = config.listen_addr().map_err(usage)?;
    let listener = TcpListener::bind(addr).await.map_err(runtime)?;
    info!(address = %listener.local_addr().map_err(runtime)?, provider = %config.provider.id, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(runtime)
}

/// Parse `args` (program name first), run, and return the exit code.
pub async fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(args) => analyze(&config, args, out).await,
        Command::Metrics(args) => metrics(&config, args, out).await,
        Command::Serve => serve(&config).await,
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FAILURE
        }
    }
}
