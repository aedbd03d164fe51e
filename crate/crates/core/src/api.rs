//! Request handling shared by the command line and the HTTP service, so
//! both give the same answer to the same request.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::ingest::{ingest_csv, ColumnMapping, CsvKind, IngestError, IngestReport};
use crate::query::{
    execute, execute_sql, parse_query, project, render_sql, render_sql_with, validate_sql, Profile, QueryContext,
    QueryError, QueryIr, SqlText, Violation,
};
use crate::rag::{run_proactive_cycle, CycleConfig, CycleOutput, LlmEndpoint, Mode, RagError};
use crate::store::{EntityRecord, KnowledgeStore, RowKey, SharedStore, StoreError, Table};
use crate::time::Timestamp;
use crate::verbalize::{verbalize_result_set, verbalize_result_set_for, EgoPose};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ApiError {
    /// Malformed request, unparseable query or rejected SQL.
    BadRequest {
        message: String,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        violations: Vec<Violation>,
    },
    NotFound {
        message: String,
    },
    /// A record breaks a table invariant.
    Unprocessable {
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        field: Option<String>,
    },
    /// The model endpoint failed or answered unusably.
    Upstream {
        message: String,
    },
    Internal {
        message: String,
    },
}

impl ApiError {
    pub fn bad(message: impl Into<String>) -> Self {
        ApiError::BadRequest { message: message.into(), violations: Vec::new() }
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest { .. } => 400,
            ApiError::NotFound { .. } => 404,
            ApiError::Unprocessable { .. } => 422,
            ApiError::Upstream { .. } => 502,
            ApiError::Internal { .. } => 500,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            ApiError::BadRequest { message, .. }
            | ApiError::NotFound { message }
            | ApiError::Unprocessable { message, .. }
            | ApiError::Upstream { message }
            | ApiError::Internal { message } => message,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())?;
        if let ApiError::BadRequest { violations, .. } = self {
            for v in violations {
                write!(f, "; {v}")?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::InvariantViolation { field, .. } => {
                ApiError::Unprocessable { message: e.to_string(), field: Some(field.to_string()) }
            }
            StoreError::EpochOutOfBounds(_) => {
                ApiError::Unprocessable { message: e.to_string(), field: Some("timestamp".into()) }
            }
            StoreError::DanglingReference { .. } => {
                ApiError::Unprocessable { message: e.to_string(), field: Some("structured_ref".into()) }
            }
            StoreError::UnknownTable(_) | StoreError::NotSpatial(_) | StoreError::InvalidQuery(_) => {
                ApiError::bad(e.to_string())
            }
            StoreError::Snapshot { .. } | StoreError::Io(_) => ApiError::Internal { message: e.to_string() },
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Store(s) => s.into(),
            QueryError::Rejected(v) => ApiError::BadRequest { message: "SQL rejected".into(), violations: v },
            other => ApiError::bad(other.to_string()),
        }
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        match e {
            RagError::EgoNotFound { .. } => ApiError::NotFound { message: e.to_string() },
            RagError::InvalidHorizon => ApiError::bad(e.to_string()),
            RagError::EndpointUnavailable(_) | RagError::MalformedPrediction(_) => {
                ApiError::Upstream { message: e.to_string() }
            }
            RagError::Query(q) => q.into(),
            RagError::Store(s) => s.into(),
            RagError::Io(_) => ApiError::Internal { message: e.to_string() },
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(_) => ApiError::Internal { message: e.to_string() },
            other => ApiError::bad(other.to_string()),
        }
    }
}

/// A query given as a sentence, as IR, or as SQL (exactly one).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryRequest {
    pub nl: Option<String>,
    pub ir: Option<QueryIr>,
    pub sql: Option<String>,
    /// Values for "my car", "the current position" and "now".
    pub context: QueryContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ir: Option<QueryIr>,
    /// Statement that was (or would be) executed.
    pub sql: SqlText,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compat_sql: Option<SqlText>,
    /// Deferred references the context did not supply; no rows are
    /// returned while any remain.
    pub unbound: Vec<String>,
    pub count: usize,
    pub rows: Vec<Json>,
    pub text: String,
}

fn missing(ir: &QueryIr, ctx: &QueryContext) -> Vec<String> {
    ir.unbound()
        .into_iter()
        .filter(|n| match *n {
            "current_position" => ctx.position.is_none(),
            "current_time" => ctx.time.is_none(),
            "ego_id" => ctx.ego_id.is_none(),
            _ => true,
        })
        .map(str::to_string)
        .collect()
}

/// Pose of the context's ego at the context time, when the store has it.
/// Result text is then phrased relative to the ego ("the signal ahead").
fn ego_record<'a>(store: &'a KnowledgeStore, ctx: &QueryContext) -> Option<&'a EntityRecord> {
    let (ego, t) = (ctx.ego_id.as_ref()?, ctx.time?);
    let key = RowKey(format!("{ego}@{t}"));
    [Table::Vehicles, Table::Pedestrians].iter().find_map(|&tb| store.query_by_key(tb, &key))
}

/// A context naming the ego and the time but no position takes the
/// position from the ego's own record at that time.
fn resolve_context(store: &KnowledgeStore, ctx: &QueryContext) -> QueryContext {
    let mut ctx = ctx.clone();
    if ctx.position.is_none() {
        ctx.position = ego_record(store, &ctx).and_then(EntityRecord::position);
    }
    ctx
}

fn context_pose(store: &KnowledgeStore, ctx: &QueryContext) -> Option<EgoPose> {
    let rec = ego_record(store, ctx)?;
    let (vx, vy) = match rec {
        EntityRecord::Vehicles(v) => (v.vx, v.vy),
        EntityRecord::Pedestrians(p) => (p.vx, p.vy),
        _ => return None,
    };
    let position = ctx.position.or_else(|| rec.position())?;
    Some(EgoPose::from_velocity(position, vx, vy))
}

fn describe(store: &KnowledgeStore, ctx: &QueryContext, recs: &[&EntityRecord]) -> String {
    match context_pose(store, ctx) {
        Some(pose) => verbalize_result_set_for(recs.iter().copied(), &pose),
        None => verbalize_result_set(recs.iter().copied()),
    }
}

fn run_ir(store: &KnowledgeStore, ir: QueryIr, ctx: &QueryContext) -> Result<QueryResponse, ApiError> {
    ir.validate()?;
    let compat_sql = Some(render_sql_with(&ir, Profile::Compat));
    let unbound = missing(&ir, ctx);
    if !unbound.is_empty() {
        let sql = render_sql(&ir);
        let v = validate_sql(&sql, Profile::Default);
        if !v.is_empty() {
            return Err(ApiError::BadRequest { message: "SQL rejected".into(), violations: v });
        }
        return Ok(QueryResponse {
            ir: Some(ir),
            sql,
            compat_sql,
            unbound,
            count: 0,
            rows: Vec::new(),
            text: String::new(),
        });
    }
    let bound = ir.bind(ctx)?;
    let sql = render_sql(&bound);
    let v = validate_sql(&sql, Profile::Default);
    if !v.is_empty() {
        return Err(ApiError::BadRequest { message: "SQL rejected".into(), violations: v });
    }
    let recs = execute(&bound, store)?;
    let rows = project(&recs, &bound.columns());
    let text = describe(store, ctx, &recs);
    Ok(QueryResponse { ir: Some(ir), sql, compat_sql, unbound, count: rows.len(), rows, text })
}

pub fn run_query(store: &KnowledgeStore, req: &QueryRequest) -> Result<QueryResponse, ApiError> {
    let given = [req.nl.is_some(), req.ir.is_some(), req.sql.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return Err(ApiError::bad("give exactly one of nl, ir, sql"));
    }
    let ctx = resolve_context(store, &req.context);
    if let Some(nl) = &req.nl {
        return run_ir(store, parse_query(nl)?, &ctx);
    }
    if let Some(ir) = &req.ir {
        return run_ir(store, ir.clone(), &ctx);
    }
    let sql = SqlText(req.sql.clone().unwrap_or_default());
    let v = validate_sql(&sql, Profile::Default);
    if !v.is_empty() {
        return Err(ApiError::BadRequest { message: "SQL rejected".into(), violations: v });
    }
    let out = execute_sql(&sql, store, &ctx)?;
    let rows = project(&out.records, &out.columns);
    let text = describe(store, &ctx, &out.records);
    Ok(QueryResponse { ir: None, sql, compat_sql: None, unbound: Vec::new(), count: rows.len(), rows, text })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertResponse {
    pub inserted: usize,
    pub replaced: usize,
    pub keys: Vec<String>,
}

/// Insert a batch under one write lock. Every record is validated first,
/// so an invariant violation leaves the store untouched.
pub fn insert_records(store: &SharedStore, records: Vec<EntityRecord>) -> Result<InsertResponse, ApiError> {
    store.write(|s| {
        for r in &records {
            r.validate(&s.config().limits)?;
        }
        let mut resp = InsertResponse { inserted: 0, replaced: 0, keys: Vec::with_capacity(records.len()) };
        for r in records {
            let o = s.insert(r)?;
            if o.replaced {
                resp.replaced += 1;
            } else {
                resp.inserted += 1;
            }
            resp.keys.push(o.key.0);
        }
        Ok(resp)
    })
}

fn default_horizon() -> usize {
    10
}

fn default_mode() -> Mode {
    Mode::Senserag
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleRequest {
    pub ego_id: String,
    pub t: Timestamp,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

pub fn run_cycle(
    store: &KnowledgeStore,
    llm: &dyn LlmEndpoint,
    cfg: &CycleConfig,
    req: &CycleRequest,
) -> Result<CycleOutput, ApiError> {
    Ok(run_proactive_cycle(store, &req.ego_id, req.t, req.horizon, llm, req.mode, cfg)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestRequest {
    pub trajectories: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub signals: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
}

pub fn ingest_files(store: &mut KnowledgeStore, req: &IngestRequest) -> Result<IngestReport, ApiError> {
    let mapping = match &req.mapping {
        Some(p) => ColumnMapping::load(p)?,
        None => ColumnMapping::default(),
    };
    let mut report = IngestReport::default();
    for (path, kind) in
        [(&req.trajectories, CsvKind::Trajectory), (&req.weather, CsvKind::Weather), (&req.signals, CsvKind::Signals)]
    {
        if let Some(p) = path {
            let r = ingest_csv(p, kind, &mapping, store).map_err(|e| ApiError::bad(format!("{}: {e}", p.display())))?;
            report.merge(r);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub records: usize,
}

pub fn health(store: &KnowledgeStore) -> Health {
    Health { status: "ok".into(), version: VERSION.into(), records: store.len() }
}
