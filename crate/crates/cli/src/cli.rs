use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use envkb::api::{self, ApiError, CycleRequest, IngestRequest, QueryRequest};
use envkb::config::{EndpointKind, RunConfig};
use envkb::eval::{constant_velocity_store, render_report, run_experiment, ReportFormat, SyntheticConfig};
use envkb::geom::Point;
use envkb::query::{QueryContext, QueryIr};
use envkb::rag::{write_cycle_log, Mode};
use envkb::store::{KnowledgeStore, SharedStore, StoreConfig};
use envkb::time::Timestamp;

use crate::server::{serve, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "envkb",
    version,
    about = "Spatiotemporal knowledge base with retrieval-augmented trajectory prediction"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load CSV files into a store and print the ingest report.
    Ingest(IngestArgs),
    /// Run a natural-language, IR or SQL query and print the rows.
    Query(QueryArgs),
    /// Run one proactive prediction cycle.
    Cycle(CycleArgs),
    /// Run the baseline and retrieval arms over every scenario.
    Eval(EvalArgs),
    /// Serve the JSON API.
    Serve(ServeArgs),
    /// Inspect or generate store snapshots.
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Store snapshot (JSON lines). Overrides `store_snapshot` in the config.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EndpointArg {
    /// Use the named stub endpoint instead of the configured one.
    #[arg(long)]
    pub stub: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, alias = "trajectories")]
    pub vehicles: Option<PathBuf>,
    #[arg(long)]
    pub weather: Option<PathBuf>,
    #[arg(long)]
    pub signals: Option<PathBuf>,
    /// Column mapping (TOML) for non-canonical headers and units.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Where to write the resulting snapshot; defaults to `--store`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("form").required(true).args(["nl", "sql", "ir"]))]
pub struct QueryArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub nl: Option<String>,
    #[arg(long)]
    pub sql: Option<String>,
    /// Query IR as JSON.
    #[arg(long)]
    pub ir: Option<String>,
    #[arg(long)]
    pub ego: Option<String>,
    #[arg(long, requires = "y", allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, requires = "x", allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub time: Option<Timestamp>,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub endpoint: EndpointArg,
    #[arg(long)]
    pub ego: String,
    #[arg(long)]
    pub time: Timestamp,
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Senserag)]
    pub mode: ModeArg,
    /// Write the request/response transcript below this directory.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Baseline,
    Senserag,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Senserag => Mode::Senserag,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub endpoint: EndpointArg,
    /// Evaluate on a generated constant-velocity scene instead of a snapshot.
    #[arg(long, conflicts_with = "store")]
    pub synthetic: bool,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub max_scenarios: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-cycle transcripts below this directory.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub endpoint: EndpointArg,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Subcommand)]
pub enum SnapshotCommand {
    /// Print per-table record counts.
    Info(StoreArg),
    /// Write a constant-velocity synthetic scene.
    Synthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        vehicles: usize,
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parse `argv`, run the command and return the process exit code.
/// JSON results go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn print_json(out: &mut dyn Write, v: &impl Serialize) -> CmdResult {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => {
            let c = RunConfig::from_toml("")?;
            c.validate()?;
            c
        }
    })
}

fn store_path(arg: &StoreArg, cfg: &RunConfig) -> Option<PathBuf> {
    arg.store.clone().or_else(|| cfg.store_snapshot.clone())
}

fn open_store(path: Option<&Path>) -> Result<KnowledgeStore, Box<dyn std::error::Error>> {
    match path {
        Some(p) => KnowledgeStore::load(p, StoreConfig::default())
            .map_err(|e| format!("cannot load snapshot {}: {e}", p.display()).into()),
        None => Ok(KnowledgeStore::new(StoreConfig::default())),
    }
}

fn endpoint(cfg: &mut RunConfig, arg: &EndpointArg) {
    if let Some(name) = &arg.stub {
        cfg.endpoint.kind = EndpointKind::Stub;
        cfg.endpoint.stub = name.clone();
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => {
            let path = store_path(&a.store, &cfg);
            let mut store = match &path {
                Some(p) if p.exists() => open_store(Some(p))?,
                _ => KnowledgeStore::new(StoreConfig::default()),
            };
            let req = IngestRequest {
                trajectories: a.vehicles.or(cfg.datasets.trajectories.clone()),
                weather: a.weather.or(cfg.datasets.weather.clone()),
                signals: a.signals.or(cfg.datasets.signals.clone()),
                mapping: a.mapping.or(cfg.datasets.mapping.clone()),
            };
            if req.trajectories.is_none() && req.weather.is_none() && req.signals.is_none() {
                return Err("nothing to ingest: give --vehicles, --weather or --signals".into());
            }
            let report = api::ingest_files(&mut store, &req)?;
            if let Some(dest) = a.out.or(path) {
                store.save(&dest)?;
                writeln!(err, "wrote {} records to {}", store.len(), dest.display())?;
            }
            print_json(out, &report)
        }
        Command::Query(a) => {
            let store = open_store(store_path(&a.store, &cfg).as_deref())?;
            let ir = match &a.ir {
                Some(text) => Some(
                    serde_json::from_str::<QueryIr>(text)
                        .map_err(|e| ApiError::bad(format!("invalid IR JSON: {e}")))?,
                ),
                None => None,
            };
            let req = QueryRequest {
                nl: a.nl,
                ir,
                sql: a.sql,
                context: QueryContext {
                    ego_id: a.ego,
                    position: a.x.zip(a.y).map(|(x, y)| Point::new(x, y)),
                    time: a.time,
                },
            };
            print_json(out, &api::run_query(&store, &req)?)
        }
        Command::Cycle(a) => {
            endpoint(&mut cfg, &a.endpoint);
            let store = open_store(store_path(&a.store, &cfg).as_deref())?;
            let llm = cfg.endpoint.build()?;
            let req = CycleRequest { ego_id: a.ego, t: a.time, horizon: a.horizon, mode: a.mode.into() };
            let result = api::run_cycle(&store, llm.as_ref(), &cfg.cycle_config(), &req)?;
            if let Some(dir) = a.log_dir {
                let p = write_cycle_log(&dir, &result)?;
                writeln!(err, "transcript: {}", p.display())?;
            }
            print_json(out, &result)
        }
        Command::Eval(a) => {
            endpoint(&mut cfg, &a.endpoint);
            if let Some(h) = a.horizons {
                cfg.eval.horizons = h;
            }
            if let Some(n) = a.max_scenarios {
                cfg.eval.max_scenarios = Some(n);
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(w) = a.workers {
                cfg.eval.workers = w;
            }
            cfg.validate()?;
            let store = if a.synthetic {
                constant_velocity_store(&SyntheticConfig { seed: cfg.seed, ..SyntheticConfig::default() })
            } else {
                match store_path(&a.store, &cfg) {
                    Some(p) => open_store(Some(&p))?,
                    None => return Err("eval needs --store, --synthetic or store_snapshot in the config".into()),
                }
            };
            let llm = cfg.endpoint.build()?;
            let mut ecfg = cfg.experiment_config();
            ecfg.run_dir = a.run_dir.or(cli.config.as_ref().map(|_| cfg.output_dir.clone()));
            let report = run_experiment(&store, llm.as_ref(), &ecfg)?;
            if let Some(p) = &a.out {
                envkb::eval::emit_report(&report, a.format.into(), p)?;
            }
            write!(out, "{}", render_report(&report, a.format.into())?)?;
            Ok(())
        }
        Command::Serve(a) => {
            endpoint(&mut cfg, &a.endpoint);
            let store = open_store(store_path(&a.store, &cfg).as_deref())?;
            let state = AppState {
                store: Arc::new(SharedStore::new(store)),
                llm: Arc::from(cfg.endpoint.build()?),
                cycle: cfg.cycle_config(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, a.addr, |bound| {
                let _ = writeln!(err, "listening on http://{bound}");
            }))
            .map_err(|e| format!("cannot serve on {}: {e}", a.addr))?;
            Ok(())
        }
        Command::Snapshot(SnapshotCommand::Info(a)) => {
            let store = open_store(store_path(&a, &cfg).as_deref())?;
            #[derive(Serialize)]
            struct Info {
                records: usize,
                tables: std::collections::BTreeMap<envkb::store::Table, usize>,
            }
            print_json(out, &Info { records: store.len(), tables: store.counts() })
        }
        Command::Snapshot(SnapshotCommand::Synthetic { out: dest, vehicles, steps, seed }) => {
            let store =
                constant_velocity_store(&SyntheticConfig { vehicles, steps, seed, ..SyntheticConfig::default() });
            store.save(&dest)?;
            print_json(out, &api::health(&store))
        }
    }
}
