//! Headless driver: ingest a corpus, run the analysis pipeline, inspect
//! arcs, rank similar stories, export the store, or serve the REST API.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use storyremix_core::arc::{self, normalized_x};
use storyremix_core::config::Config;
use storyremix_core::corpus::{self, Draft};
use storyremix_core::gateway::{Cassette, Gateway, Mode, Provider, ScriptedProvider};
use storyremix_core::pipeline;
use storyremix_core::store::Store;
use storyremix_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "storyremix", version, about = "Narrative strategy analysis and remixing")]
struct Cli {
    /// TOML configuration shared with the service.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct GatewayArgs {
    /// Answer every model call from this cassette; misses are errors.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the provider and append every response to this cassette.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Scripted responses (JSON rule list) to use as the provider.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Add stories from a manifest, a directory of .txt files, or a text file.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over every story in the store.
    Analyze {
        store: PathBuf,
        /// Only these story ids.
        #[arg(long = "story")]
        stories: Vec<String>,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Print one story's valence arc.
    Arc {
        store: PathBuf,
        #[arg(long)]
        story: String,
    },
    /// Find the stored story whose arc best matches a draft.
    Similar {
        store: PathBuf,
        /// Plain-text draft; blocks are separated by blank lines.
        #[arg(long)]
        draft: PathBuf,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Print the store as canonical JSON.
    Export {
        store: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Serve the REST API over the store file.
    Serve {
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
}

/// Failure reported as `{"error": code, "message": text}` on stderr.
struct CliError {
    code: String,
    message: String,
    exit: u8,
}

impl CliError {
    fn new(code: &str, message: impl ToString) -> Self {
        CliError {
            code: code.to_string(),
            message: message.to_string(),
            exit: 1,
        }
    }

    /// Model-call failures exit with 2 so scripts can tell them apart.
    fn gateway(code: &str, message: impl ToString) -> Self {
        CliError {
            exit: 2,
            ..CliError::new(code, message)
        }
    }
}

type CliResult = Result<Value, CliError>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(Value::String(s)) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("output serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.code, "message": e.message}));
            ExitCode::from(e.exit)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p).map_err(|e| CliError::new("ConfigError", e)),
        None => Ok(Config::default()),
    }
}

fn load_store(path: &Path) -> Result<Store, CliError> {
    Store::load(path).map_err(|e| CliError::new("StoreError", format!("{}: {e}", path.display())))
}

fn save_store(store: &Store, path: &Path) -> Result<(), CliError> {
    store
        .save(path)
        .map_err(|e| CliError::new("StoreError", format!("{}: {e}", path.display())))
}

/// Gateway from the config file, with command-line flags taking precedence.
fn build_gateway(cfg: &Config, args: &GatewayArgs) -> Result<Gateway, CliError> {
    let mut settings = cfg.settings();
    let cassette_path = match (&args.replay, &args.record) {
        (Some(p), _) => {
            settings.mode = Mode::Replay;
            Some(p.clone())
        }
        (None, Some(p)) => {
            settings.mode = Mode::Record;
            Some(p.clone())
        }
        (None, None) => cfg.gateway.cassette.clone(),
    };
    let cassette = match &cassette_path {
        Some(p) => Cassette::open(p).map_err(|e| CliError::new("CassetteError", format!("{}: {e}", p.display())))?,
        None => Cassette::in_memory(),
    };
    let provider: Option<Arc<dyn Provider>> = match (&args.script, settings.mode) {
        (_, Mode::Replay) => None,
        (Some(script), _) => Some(Arc::new(
            ScriptedProvider::from_file(script).map_err(|e| CliError::new("ProviderError", e))?,
        )),
        (None, _) => cfg.provider().map_err(|e| CliError::new("ProviderError", e))?,
    };
    Ok(Gateway::new(settings, provider, cassette))
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { input, out } => {
            let entries = corpus::read_corpus_input(&input).map_err(|e| CliError::new("MalformedManifest", e))?;
            let mut store = if out.exists() { load_store(&out)? } else { Store::new() };
            let ids = entries
                .iter()
                .map(|e| store.ingest(&e.title, &e.body))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::new("IngestError", e))?;
            save_store(&store, &out)?;
            Ok(json!({"story_ids": ids}))
        }
        Command::Analyze {
            store: path,
            stories,
            gateway,
        } => {
            let mut store = load_store(&path)?;
            let gw = build_gateway(&cfg, &gateway)?;
            let lexicon = cfg.lexicon().map_err(|e| CliError::new("LexiconError", e))?;
            let summary = pipeline::analyze_store(&mut store, &gw, cfg.analysis.classifier, &lexicon, &stories);
            save_store(&store, &path)?;
            if let Some(first) = summary.failed.first() {
                let err = store.analysis[first]
                    .error
                    .clone()
                    .expect("failed story has an error record");
                let message = format!(
                    "{} of {} stories failed; {first} at {}: {}",
                    summary.failed.len(),
                    summary.failed.len() + summary.processed.len(),
                    err.stage,
                    err.message
                );
                return Err(if is_gateway_code(&err.code) {
                    CliError::gateway(&err.code, message)
                } else {
                    CliError::new(&err.code, message)
                });
            }
            Ok(json!(summary))
        }
        Command::Arc { store: path, story } => {
            let store = load_store(&path)?;
            store.story(&story).map_err(|e| CliError::new("UnknownStory", e))?;
            let arc = store
                .arcs
                .get(&story)
                .ok_or_else(|| CliError::new("NotAnalyzed", format!("story {story} has no arc yet")))?;
            let n = arc.points.len();
            let points: Vec<Value> = arc
                .points
                .iter()
                .map(|p| {
                    json!({
                        "block_id": p.block_id,
                        "x": normalized_x(p.index, n),
                        "y": p.signed_valence,
                        "raw_valence": p.raw_valence,
                        "adjectives": p.adjectives,
                        "coverage": p.coverage,
                    })
                })
                .collect();
            Ok(json!({"story_id": story, "protagonist": store.protagonists.get(&story), "points": points}))
        }
        Command::Similar {
            store: path,
            draft,
            gateway,
        } => {
            let store = load_store(&path)?;
            let text = std::fs::read_to_string(&draft)
                .map_err(|e| CliError::new("IoError", format!("{}: {e}", draft.display())))?;
            let blocks: Vec<String> = text
                .split("\n\n")
                .map(str::trim)
                .filter(|b| !b.is_empty())
                .map(str::to_string)
                .collect();
            let title = draft
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let draft = Draft::new("draft".into(), &title, &blocks);
            let gw = build_gateway(&cfg, &gateway)?;
            let lexicon = cfg.lexicon().map_err(|e| CliError::new("LexiconError", e))?;
            let sketched = arc::sketch_arc(&gw, &draft.story, &draft.blocks, &lexicon).map_err(arc_error)?;
            let arcs: Vec<_> = store.arcs.values().cloned().collect();
            let best = arc::most_similar(&sketched.arc.signed(), &arcs).map_err(arc_error)?;
            Ok(json!({"story_id": best.story_id, "S": best.score}))
        }
        Command::Export {
            store: path,
            format: Format::Json,
        } => Ok(Value::String(load_store(&path)?.snapshot())),
        Command::Serve { store, addr, gateway } => {
            let gw = build_gateway(&cfg, &gateway)?;
            let lexicon = cfg.lexicon().map_err(|e| CliError::new("LexiconError", e))?;
            let state = AppState::open(ServiceConfig {
                store_path: store,
                gateway: Arc::new(gw),
                lexicon: Arc::new(lexicon),
                classifier: cfg.analysis.classifier,
            })
            .map_err(|e| CliError::new("StoreError", e))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("IoError", e))?;
            rt.block_on(storyremix_service::serve(state, &addr))
                .map_err(|e| CliError::new("IoError", e))?;
            Ok(Value::Null)
        }
    }
}

fn is_gateway_code(code: &str) -> bool {
    matches!(
        code,
        "FixtureMiss" | "NoProvider" | "SchemaInvalidAfterRetry" | "ProviderError" | "CassetteError"
    )
}

fn arc_error(e: arc::ArcError) -> CliError {
    if is_gateway_code(e.code()) {
        CliError::gateway(e.code(), e)
    } else {
        CliError::new(e.code(), e)
    }
}
