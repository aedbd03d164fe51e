//! The proactive cycle: perceive, ask, retrieve, combine, predict.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::query::{execute, parse_query_with, render_sql, ParserConfig, QueryContext, QueryIr, SqlText};
use crate::store::KnowledgeStore;
use crate::time::Timestamp;
use crate::verbalize::{verbalize_result_set_for, EMPTY_RESULT};

use super::llm::{ChatMessage, ChatRequest, LlmEndpoint, LlmError};
use super::perception::{build_snapshot, PerceptionSnapshot};
use super::prompt::{combine, fill, query_prompt, PromptBundle, PREDICTION_REPAIR, QUERY_REPAIR, SYSTEM};
use super::RagError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Senserag,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Senserag => "senserag",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "senserag" => Ok(Mode::Senserag),
            _ => Err(format!("unknown mode {s:?} (expected baseline or senserag)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Range of the ego's own sensors, m.
    pub perception_radius: f64,
    /// Default search radius for generated queries that name none, m.
    pub retrieval_radius: f64,
    /// Earlier ego states shown in the prompt.
    pub history: usize,
    /// Time between consecutive dataset frames, s.
    pub step_seconds: f64,
    pub model: String,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            perception_radius: 30.0,
            retrieval_radius: 100.0,
            history: 5,
            step_seconds: 1.0,
            model: "stub".into(),
            temperature: 0.0,
            seed: Some(0),
        }
    }
}

/// Query used when the endpoint cannot produce a parseable one.
pub fn template_query(t: Timestamp, x: f64, y: f64) -> String {
    format!(
        "At timestamp {}, provide the location, velocity, and acceleration of my car located at ({x}, {y}). In addition, provide the same information for other vehicles around my car.",
        t.to_sentence_form()
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ChatRequest,
    pub response: Result<String, String>,
}

/// Wraps an endpoint and keeps every request/response pair.
pub struct Recorder<'a> {
    inner: &'a dyn LlmEndpoint,
    pub log: Vec<Exchange>,
}

impl<'a> Recorder<'a> {
    pub fn new(inner: &'a dyn LlmEndpoint) -> Self {
        Recorder { inner, log: Vec::new() }
    }

    pub fn call(&mut self, request: ChatRequest) -> Result<String, LlmError> {
        let r = self.inner.complete(&request);
        self.log.push(Exchange { request, response: r.clone().map_err(|e| e.to_string()) });
        r
    }
}

fn request(cfg: &CycleConfig, messages: Vec<ChatMessage>) -> ChatRequest {
    ChatRequest { model: cfg.model.clone(), messages, temperature: cfg.temperature, seed: cfg.seed }
}

fn unavailable(e: LlmError) -> RagError {
    RagError::EndpointUnavailable(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub text: String,
    pub ir: QueryIr,
    /// The endpoint's text was unusable and the template query was used.
    pub fallback: bool,
}

static QUERY_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^\s*QUERY:\s*(.+?)\s*$").unwrap());

fn extract_query(reply: &str) -> String {
    match QUERY_LINE.captures_iter(reply).last() {
        Some(c) => c[1].to_string(),
        None => reply.trim().to_string(),
    }
}

/// Ask the endpoint what to look up, with one repair round-trip before
/// falling back to [`template_query`].
pub fn generate_query(
    s: &PerceptionSnapshot,
    llm: &mut Recorder,
    cfg: &CycleConfig,
) -> Result<GeneratedQuery, RagError> {
    let parser = ParserConfig { default_radius: cfg.retrieval_radius };
    let mut messages = vec![ChatMessage::system(SYSTEM.trim_end()), ChatMessage::user(query_prompt(s))];
    for attempt in 0..2 {
        let reply = llm.call(request(cfg, messages.clone())).map_err(unavailable)?;
        let text = extract_query(&reply);
        match parse_query_with(&text, &parser) {
            Ok(ir) => return Ok(GeneratedQuery { text, ir, fallback: false }),
            Err(e) if attempt == 0 => {
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(fill(QUERY_REPAIR, &[("error", &e.to_string())])));
            }
            Err(e) => tracing::warn!(error = %e, "falling back to the template query"),
        }
    }
    let text = template_query(s.t, s.ego_state.x, s.ego_state.y);
    let ir = parse_query_with(&text, &parser)?;
    Ok(GeneratedQuery { text, ir, fallback: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub horizon: usize,
    pub points: Vec<Point>,
    pub raw: String,
    pub provenance: Mode,
}

static NUM: &str = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?";
static STEP_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?im)^\s*step\s+(\d+)\s*:\s*\(\s*({NUM})\s*,\s*({NUM})\s*\)\s*$")).unwrap());

/// Read `step k: (x, y)` lines for k = 1..=horizon. Other lines are ignored.
pub fn parse_prediction(text: &str, horizon: usize) -> Result<Vec<Point>, String> {
    let mut pts = Vec::new();
    for c in STEP_LINE.captures_iter(text) {
        let k: usize = c[1].parse().map_err(|_| format!("bad step number {}", &c[1]))?;
        if k != pts.len() + 1 {
            return Err(format!("expected step {}, found step {k}", pts.len() + 1));
        }
        let (x, y): (f64, f64) = (c[2].parse().unwrap(), c[3].parse().unwrap());
        if !(x.is_finite() && y.is_finite()) {
            return Err(format!("step {k} is not finite"));
        }
        pts.push(Point::new(x, y));
    }
    if pts.len() != horizon {
        return Err(format!("expected {horizon} steps, found {}", pts.len()));
    }
    Ok(pts)
}

/// Send the bundle and parse the answer, repairing once.
pub fn predict(
    llm: &mut Recorder,
    bundle: &PromptBundle,
    horizon: usize,
    mode: Mode,
    cfg: &CycleConfig,
) -> Result<PredictionResult, RagError> {
    if horizon == 0 {
        return Err(RagError::InvalidHorizon);
    }
    let mut messages = vec![ChatMessage::system(SYSTEM.trim_end()), ChatMessage::user(bundle.user_message())];
    let mut last = String::new();
    for attempt in 0..2 {
        let reply = llm.call(request(cfg, messages.clone())).map_err(unavailable)?;
        match parse_prediction(&reply, horizon) {
            Ok(points) => return Ok(PredictionResult { horizon, points, raw: reply, provenance: mode }),
            Err(e) if attempt == 0 => {
                let h = horizon.to_string();
                messages.push(ChatMessage::assistant(reply.clone()));
                messages.push(ChatMessage::user(fill(PREDICTION_REPAIR, &[("error", &e), ("horizon", &h)])));
                last = reply;
            }
            Err(_) => last = reply,
        }
    }
    Err(RagError::MalformedPrediction(last))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub query: GeneratedQuery,
    pub sql: SqlText,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleOutput {
    pub ego_id: String,
    pub t: Timestamp,
    pub mode: Mode,
    pub prediction: PredictionResult,
    pub bundle: PromptBundle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<Retrieval>,
    pub transcript: Vec<Exchange>,
}

/// Retrieval half of the senserag arm: query, bind, execute, verbalize.
fn search(
    store: &KnowledgeStore,
    s: &PerceptionSnapshot,
    llm: &mut Recorder,
    cfg: &CycleConfig,
) -> Result<(String, Retrieval), RagError> {
    let query = generate_query(s, llm, cfg)?;
    let ctx = QueryContext { ego_id: Some(s.ego_id.clone()), position: Some(s.ego_state.position()), time: Some(s.t) };
    let bound = query.ir.bind(&ctx)?;
    let rows = execute(&bound, store)?;
    let text = verbalize_result_set_for(rows.iter().copied(), &s.pose());
    let retrieval = Retrieval { sql: render_sql(&bound), rows: rows.len(), query };
    Ok((text, retrieval))
}

/// One full cycle for `ego_id` at `t`. The baseline arm skips retrieval and
/// combines perception with the empty-result sentence.
pub fn run_proactive_cycle(
    store: &KnowledgeStore,
    ego_id: &str,
    t: Timestamp,
    horizon: usize,
    llm: &dyn LlmEndpoint,
    mode: Mode,
    cfg: &CycleConfig,
) -> Result<CycleOutput, RagError> {
    if horizon == 0 {
        return Err(RagError::InvalidHorizon);
    }
    let snap = build_snapshot(store, ego_id, t, cfg.perception_radius, cfg.history)?;
    let mut rec = Recorder::new(llm);
    let (k, retrieval) = match mode {
        Mode::Baseline => (EMPTY_RESULT.to_string(), None),
        Mode::Senserag => {
            let (k, r) = search(store, &snap, &mut rec, cfg)?;
            (k, Some(r))
        }
    };
    let bundle = combine(&snap, &k, horizon, cfg.step_seconds);
    let prediction = predict(&mut rec, &bundle, horizon, mode, cfg)?;
    Ok(CycleOutput { ego_id: ego_id.to_string(), t, mode, prediction, bundle, retrieval, transcript: rec.log })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Write one cycle's transcript to `dir` as pretty JSON; returns the path.
pub fn write_cycle_log(dir: &Path, out: &CycleOutput) -> Result<PathBuf, RagError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}-{}-{}.json", sanitize(&out.ego_id), out.t.millis(), out.mode.name()));
    let body = serde_json::to_string_pretty(out).map_err(|e| RagError::Io(std::io::Error::other(e)))?;
    std::fs::write(&path, body + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rag::stubs::{ConstantVelocityStub, ScriptedStub};
    use crate::store::{EntityRecord, StoreConfig, VehicleClass, VehicleRecord};

    fn car(id: &str, t: i64, x: f64, y: f64, vx: f64) -> EntityRecord {
        EntityRecord::Vehicles(VehicleRecord {
            entity_id: id.into(),
            timestamp: Timestamp::from_millis(t * 1000),
            x,
            y,
            vx,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            class: VehicleClass::Car,
        })
    }

    fn scene() -> KnowledgeStore {
        let mut s = KnowledgeStore::new(StoreConfig::default());
        for t in 0..3 {
            s.insert(car("ego", t, t as f64, 0.0, 1.0)).unwrap();
        }
        s.insert(car("near", 2, 12.0, 0.0, 0.0)).unwrap();
        s.insert(car("far", 2, 52.0, 0.0, 0.0)).unwrap();
        s
    }

    #[test]
    fn parses_steps_and_ignores_reasoning() {
        let pts = parse_prediction("Ego moves east.\nstep 1: (1, 0)\nSTEP 2: ( 2.5 , -1e-3 )", 2).unwrap();
        assert_eq!(pts, vec![Point::new(1.0, 0.0), Point::new(2.5, -0.001)]);
        assert!(parse_prediction("step 1: (1, 0)\nstep 3: (1, 0)", 2).is_err());
        assert!(parse_prediction("step 1: (1, 0)", 2).is_err());
    }

    #[test]
    fn template_query_parses() {
        let q = template_query(Timestamp::parse("2023-09-24 00:01:17").unwrap(), 604739.287, 5792784.4887500005);
        assert!(q.contains("(604739.287, 5792784.4887500005)"));
        assert!(crate::query::parse_query(&q).is_ok());
    }

    #[test]
    fn constant_velocity_cycle_extrapolates() {
        let s = scene();
        let out = run_proactive_cycle(
            &s,
            "ego",
            Timestamp::from_millis(2000),
            3,
            &ConstantVelocityStub::default(),
            Mode::Senserag,
            &CycleConfig::default(),
        )
        .unwrap();
        assert_eq!(out.prediction.points, vec![Point::new(3.0, 0.0), Point::new(4.0, 0.0), Point::new(5.0, 0.0)]);
        let r = out.retrieval.unwrap();
        assert!(!r.query.fallback);
        assert_eq!(r.rows, 2);
    }

    #[test]
    fn far_vehicle_only_in_knowledge() {
        let s = scene();
        let run = |mode| {
            run_proactive_cycle(
                &s,
                "ego",
                Timestamp::from_millis(2000),
                1,
                &ConstantVelocityStub::default(),
                mode,
                &CycleConfig::default(),
            )
            .unwrap()
        };
        let (b, r) = (run(Mode::Baseline), run(Mode::Senserag));
        assert_eq!(b.bundle.x, r.bundle.x);
        assert_eq!(b.bundle.k, EMPTY_RESULT);
        assert!(r.bundle.k.contains("(52.00, 0.00)"));
        assert!(!r.bundle.x.contains("(52.00, 0.00)"));
        assert!(r.bundle.x.contains("(12.00, 0.00)"));
    }

    #[test]
    fn gibberish_twice_falls_back() {
        let s = scene();
        let stub = ScriptedStub { query: vec!["bananas".into()], prediction: vec!["step 1: (0, 0)".into()] };
        let out = run_proactive_cycle(
            &s,
            "ego",
            Timestamp::from_millis(2000),
            1,
            &stub,
            Mode::Senserag,
            &CycleConfig::default(),
        )
        .unwrap();
        let r = out.retrieval.unwrap();
        assert!(r.query.fallback);
        assert_eq!(r.query.text, template_query(Timestamp::from_millis(2000), 2.0, 0.0));
        assert_eq!(out.transcript.len(), 3);
    }

    #[test]
    fn short_prediction_is_malformed_after_repair() {
        let s = scene();
        let stub = ScriptedStub { query: vec![], prediction: vec!["step 1: (0, 0)\nstep 2: (0, 0)".into()] };
        let err = run_proactive_cycle(
            &s,
            "ego",
            Timestamp::from_millis(2000),
            3,
            &stub,
            Mode::Baseline,
            &CycleConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RagError::MalformedPrediction(_)));
    }

    #[test]
    fn missing_ego() {
        let s = scene();
        let err = run_proactive_cycle(
            &s,
            "ego",
            Timestamp::from_millis(9000),
            1,
            &ConstantVelocityStub::default(),
            Mode::Baseline,
            &CycleConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.class(), "ego_not_found");
    }
}
