use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dawzy::gateway::remote::{RemoteConfig, RemotePlanner};
use dawzy::gateway::transcript::TranscriptLog;
use dawzy::gateway::{Planner, RulesPlanner};
use dawzy::host::{load_project, load_registry, save_project, Host};
use dawzy::mcp::{transport, Server, Tools};
use dawzy_core::beat::render_prompt_wav;
use dawzy_core::engine::Engine;
use dawzy_core::hum::hum_to_midi;
use dawzy_core::script::{execute, parse, Validator};

#[derive(Parser)]
#[command(name = "dawzy", version, about = "Natural-language editing for a virtual DAW session")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SessionArgs {
    /// Project file; loaded at start and saved after every change.
    #[arg(long, env = "DAWZY_PROJECT")]
    project: Option<PathBuf>,
    /// Unit registry JSON replacing the stock FX definitions.
    #[arg(long, env = "DAWZY_REGISTRY")]
    registry: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PlannerArgs {
    #[arg(long, env = "DAWZY_PLANNER", value_enum, default_value_t = PlannerKind::Rules)]
    planner: PlannerKind,
    /// Base URL of an OpenAI-style chat-completions API.
    #[arg(long, env = "DAWZY_PLANNER_URL")]
    planner_url: Option<String>,
    #[arg(long, env = "DAWZY_PLANNER_MODEL")]
    planner_model: Option<String>,
    #[arg(long, env = "DAWZY_PLANNER_API_KEY", hide_env_values = true)]
    planner_api_key: Option<String>,
    #[arg(long, env = "DAWZY_PLANNER_TIMEOUT_S", default_value_t = 60)]
    planner_timeout_s: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlannerKind {
    Rules,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// HTTP gateway, plus the tool server on TCP when --mcp-addr is set.
    Serve {
        #[arg(long, env = "DAWZY_ADDR", default_value = "127.0.0.1:8737")]
        addr: String,
        #[arg(long, env = "DAWZY_MCP_ADDR")]
        mcp_addr: Option<String>,
        /// Directory for per-session JSONL transcripts.
        #[arg(long, env = "DAWZY_TRANSCRIPTS")]
        transcripts: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Tool server only: framed JSON-RPC on stdio, or line-delimited on TCP.
    Mcp {
        #[arg(long, value_name = "ADDR")]
        tcp: Option<String>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Run the task battery.
    Eval {
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
        #[arg(long, env = "DAWZY_REGISTRY")]
        registry: Option<PathBuf>,
    },
    /// Transcribe a monophonic WAV to a Standard MIDI File.
    Hum2midi { input: PathBuf, output: PathBuf },
    /// Render a drum loop from a text prompt to a WAV file.
    Beat { prompt: String, output: PathBuf },
    /// Edit scripts.
    Script {
        #[command(subcommand)]
        command: ScriptCommand,
    },
}

#[derive(Subcommand)]
enum ScriptCommand {
    /// Parse, validate and execute a script against a project file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        session: SessionArgs,
    },
}

fn planner(args: &PlannerArgs) -> anyhow::Result<Box<dyn Planner>> {
    Ok(match args.planner {
        PlannerKind::Rules => Box::new(RulesPlanner),
        PlannerKind::Remote => {
            let (Some(base_url), Some(model)) = (args.planner_url.clone(), args.planner_model.clone()) else {
                bail!("the remote planner needs DAWZY_PLANNER_URL and DAWZY_PLANNER_MODEL");
            };
            Box::new(RemotePlanner::http(RemoteConfig {
                base_url,
                model,
                api_key: args.planner_api_key.clone(),
                timeout: Duration::from_secs(args.planner_timeout_s),
            }))
        }
    })
}

fn open_host(session: &SessionArgs) -> anyhow::Result<Arc<Host>> {
    let registry = load_registry(session.registry.as_deref())?;
    Ok(match &session.project {
        Some(path) => Host::with_project(path, registry)?,
        None => Host::new(Engine::with_registry(registry)),
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("DAWZY_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { addr, mcp_addr, transcripts, session, planner: p } => {
            let host = open_host(&session)?;
            let transcripts = transcripts.map(TranscriptLog::new).transpose().context("transcript directory")?;
            let state = dawzy::app_state(Arc::clone(&host), planner(&p)?, transcripts);
            if let Some(mcp_addr) = mcp_addr {
                let listener = std::net::TcpListener::bind(&mcp_addr).with_context(|| format!("binding {mcp_addr}"))?;
                tracing::info!("tool server listening on {}", listener.local_addr()?);
                let server = Arc::new(Server::new(state.tools.clone()));
                std::thread::spawn(move || transport::serve_tcp(server, listener));
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(dawzy::http::serve(state, &addr))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mcp { tcp, session } => {
            let host = open_host(&session)?;
            let server = Server::new(Arc::new(Tools::new(host)));
            match tcp {
                Some(addr) => {
                    let listener = std::net::TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    tracing::info!("tool server listening on {}", listener.local_addr()?);
                    transport::serve_tcp(Arc::new(server), listener)?;
                }
                None => transport::serve_stdio(&server)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { planner: p, trials, json, registry } => {
            let registry = load_registry(registry.as_deref())?;
            // fail fast on bad remote configuration
            planner(&p)?;
            let started = Instant::now();
            let report =
                dawzy::eval::run_eval(&|| planner(&p).unwrap_or_else(|_| Box::new(RulesPlanner)), trials, &registry);
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            eprintln!("elapsed {:.2} s", started.elapsed().as_secs_f64());
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Hum2midi { input, output } => {
            let wav = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let midi = hum_to_midi(&wav).with_context(|| format!("transcribing {}", input.display()))?;
            std::fs::write(&output, midi).with_context(|| format!("writing {}", output.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Beat { prompt, output } => {
            let (spec, wav) = render_prompt_wav(&prompt);
            std::fs::write(&output, wav).with_context(|| format!("writing {}", output.display()))?;
            eprintln!(
                "{} bpm, {} beats, {} ({:.3} s, {} samples)",
                spec.tempo_bpm,
                spec.beats,
                spec.preset.name(),
                spec.duration_s(),
                spec.sample_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Script { command: ScriptCommand::Run { file, session } } => run_script(&file, &session),
    }
}

fn run_script(file: &Path, session: &SessionArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let script = match parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!(
                "{}:{}:{}: parse error: expected {}, found {}",
                file.display(),
                e.line,
                e.col,
                e.expected,
                e.found
            );
            return Ok(ExitCode::from(2));
        }
    };
    let registry = load_registry(session.registry.as_deref())?;
    let mut engine = match &session.project {
        Some(p) if p.exists() => load_project(p, registry)?,
        _ => Engine::with_registry(registry),
    };
    let plan = match Validator::new(engine.registry()).validate(&script, &engine.state_summary()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {} ({})", file.display(), e, e.code());
            return Ok(ExitCode::from(3));
        }
    };
    let report = execute(&mut engine, &plan).map_err(|e| anyhow::anyhow!("{e} ({})", e.code()))?;
    for line in &report.explanation {
        println!("{line}");
    }
    let doc = engine.state_summary();
    match &session.project {
        Some(p) => save_project(p, &doc)?,
        None => println!("{}", doc.to_json_pretty()),
    }
    Ok(ExitCode::SUCCESS)
}
