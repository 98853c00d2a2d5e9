use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gridlock_core::activities::write_chart_csv;
use gridlock_core::content::BlockGraph;
use gridlock_core::dsl::Rubric;
use gridlock_core::sim::ArchetypeMix;
use gridlock_core::telemetry::EventLog;
use gridlock_service::engine::{load_snapshots, Engine, EngineConfig};
use gridlock_service::{http, ops};

#[derive(Parser)]
#[command(name = "gridlock", version, about = "Gridlock tutoring service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Curriculum document; the shipped curriculum when omitted.
        #[arg(long)]
        curriculum: Option<PathBuf>,
        /// Directory holding pre-trained `<block>.json` snapshots.
        #[arg(long)]
        agents_dir: PathBuf,
        /// Explore and learn from live sessions.
        #[arg(long)]
        train: bool,
        /// Event log; defaults to `<agents-dir>/events.ndjson`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Static files for the game client.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Pre-train agents on a simulated cohort.
    Train {
        /// Archetype mix document; the shipped mix when omitted.
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curriculum: Option<PathBuf>,
    },
    /// Rebuild agents from an event log.
    Replay {
        log: PathBuf,
        /// Compare the rebuilt agents with the snapshots the server wrote.
        #[arg(long)]
        verify: bool,
        /// Defaults to the log's directory.
        #[arg(long)]
        agents_dir: Option<PathBuf>,
        #[arg(long)]
        curriculum: Option<PathBuf>,
    },
    /// Grade a controller source file.
    Grade {
        file: PathBuf,
        /// Rubric document; the shipped traffic rubric when omitted.
        #[arg(long)]
        rubric: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Pre/post improvement report, one group per log.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        curriculum: Option<PathBuf>,
    },
}

fn curriculum(path: Option<&PathBuf>) -> anyhow::Result<BlockGraph> {
    match path {
        None => Ok(BlockGraph::gridlock()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            BlockGraph::load(&text).with_context(|| format!("loading {}", p.display()))
        }
    }
}

async fn serve(
    port: u16,
    host: String,
    graph: BlockGraph,
    agents_dir: PathBuf,
    train: bool,
    log: Option<PathBuf>,
    static_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let base = load_snapshots(&agents_dir)?;
    let log_path = log.unwrap_or_else(|| agents_dir.join(ops::LOG_FILE));
    let log = EventLog::open(&log_path).with_context(|| format!("opening {}", log_path.display()))?;
    let config = EngineConfig { train, live_dir: Some(agents_dir.join(ops::LIVE_DIR)) };
    let engine = Arc::new(Engine::new(graph, base, log, config)?);
    tracing::info!(events = engine.log().len(), log = %log_path.display(), train, "engine ready");
    let app = http::router(engine, static_dir);
    let addr: SocketAddr = format!("{host}:{port}").parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { port, curriculum: c, agents_dir, train, log, static_dir, host } => {
            let graph = curriculum(c.as_ref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(port, host, graph, agents_dir, train, log, static_dir))?;
        }
        Command::Train { cohort, episodes, seed, out, curriculum: c } => {
            let graph = curriculum(c.as_ref())?;
            let mix = match cohort {
                Some(p) => ArchetypeMix::from_toml(&std::fs::read_to_string(&p)?)?,
                None => ArchetypeMix::shipped(),
            };
            let outcome = ops::train_to_dir(&graph, &mix, episodes, seed, &out)?;
            let n = outcome.episode_rewards.len();
            let head = outcome.mean_reward(0..n.min(500));
            let tail = outcome.mean_reward(n.saturating_sub(500)..n);
            println!("trained {} agents for {episodes} episodes into {}", graph.len(), out.display());
            println!("mean reward: first 500 {head:.4}, last 500 {tail:.4}");
        }
        Command::Replay { log, verify, agents_dir, curriculum: c } => {
            let graph = curriculum(c.as_ref())?;
            let dir = agents_dir.unwrap_or_else(|| log.parent().map(PathBuf::from).unwrap_or_default());
            let report = ops::replay_verify(&graph, &log, &dir)?;
            println!("replayed {} events from {} sessions", report.events, report.sessions);
            if verify {
                for b in &report.blocks {
                    println!("{:<16} {} ({})", b.block, if b.identical { "identical" } else { "DIFFERS" }, b.expected);
                }
                if !report.ok() {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Grade { file, rubric, json } => {
            let source = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let rubric = match rubric {
                Some(p) => Rubric::from_toml(&std::fs::read_to_string(&p)?)?,
                None => Rubric::traffic(),
            };
            let result = ops::grade_source(&source, &rubric);
            if json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                for d in &result.diagnostics {
                    println!("{}:{}:{}: {:?}: {}", file.display(), d.line, d.column, d.severity, d.message);
                }
                if let Some(r) = &result.report {
                    for (name, passed) in &r.checks {
                        println!("{name:<16} {}", if *passed { "pass" } else { "FAIL" });
                    }
                    for v in &r.violations {
                        println!("  {v}");
                    }
                }
                println!("score {:.3}", result.score());
            }
        }
        Command::Report { logs, csv, curriculum: c } => {
            let graph = curriculum(c.as_ref())?;
            let reports = ops::report_logs(&graph, &logs)?;
            for r in &reports {
                println!("{:<16} n={:<4} mean improvement {:+.3} regressed {}", r.group, r.n, r.mean_improvement, r.regressed);
            }
            let file = std::fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
            write_chart_csv(&reports, file)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
