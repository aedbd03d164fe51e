//! Deterministic endpoints for tests and offline runs.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::llm::{ChatRequest, LlmEndpoint, LlmError, Role, PREDICTION_TASK_MARKER, QUERY_TASK_MARKER};
use super::template_query;
use crate::time::Timestamp;

static NUM: &str = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?";

static EGO_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?m)^time: (\S+ \S+)\n^position: \(({NUM}), ({NUM})\)\n^velocity: \(({NUM}), ({NUM})\)"))
        .unwrap()
});
static HORIZON_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^horizon: (\d+)$").unwrap());
static DT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!(r"(?m)^step_seconds: ({NUM})$")).unwrap());

/// Ego state as written in the perception block of a prompt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptEgo {
    pub t: Timestamp,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

pub fn parse_prompt_ego(prompt: &str) -> Option<PromptEgo> {
    let c = EGO_RE.captures(prompt)?;
    let f = |i: usize| c[i].parse::<f64>().ok();
    Some(PromptEgo { t: Timestamp::parse(&c[1]).ok()?, x: f(2)?, y: f(3)?, vx: f(4)?, vy: f(5)? })
}

/// Extrapolates the ego state in the prompt at constant velocity, optionally
/// shifted by a fixed offset. Query-generation requests get the template
/// query for the ego in the prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantVelocityStub {
    #[serde(default)]
    pub offset: (f64, f64),
}

impl LlmEndpoint for ConstantVelocityStub {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let prompt = req.task_prompt();
        let ego = parse_prompt_ego(prompt).ok_or_else(|| LlmError::Protocol("no ego state in prompt".into()))?;
        if req.is_task(QUERY_TASK_MARKER) {
            return Ok(format!("QUERY: {}", template_query(ego.t, ego.x, ego.y)));
        }
        if !req.is_task(PREDICTION_TASK_MARKER) {
            return Err(LlmError::Protocol("unknown task".into()));
        }
        let h: usize = HORIZON_RE
            .captures(prompt)
            .and_then(|c| c[1].parse().ok())
            .ok_or_else(|| LlmError::Protocol("no horizon in prompt".into()))?;
        let dt: f64 = DT_RE
            .captures(prompt)
            .and_then(|c| c[1].parse().ok())
            .ok_or_else(|| LlmError::Protocol("no step_seconds in prompt".into()))?;
        let lines: Vec<String> = (1..=h)
            .map(|k| {
                let s = dt * k as f64;
                let x = ego.x + ego.vx * s + self.offset.0;
                let y = ego.y + ego.vy * s + self.offset.1;
                format!("step {k}: ({x}, {y})")
            })
            .collect();
        Ok(lines.join("\n"))
    }

    fn describe(&self) -> String {
        if self.offset == (0.0, 0.0) {
            "stub:constant-velocity".into()
        } else {
            format!("stub:constant-velocity{:?}", self.offset)
        }
    }
}

/// Returns the last user message unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoStub;

impl LlmEndpoint for EchoStub {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        req.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.clone())
            .ok_or_else(|| LlmError::Protocol("no user message".into()))
    }

    fn describe(&self) -> String {
        "stub:echo".into()
    }
}

/// Fixed replies per task. The reply for a request is chosen by how many
/// assistant turns it already contains, so a repair round-trip gets the
/// next entry; the last entry repeats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedStub {
    #[serde(default)]
    pub query: Vec<String>,
    #[serde(default)]
    pub prediction: Vec<String>,
}

impl LlmEndpoint for ScriptedStub {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let script = if req.is_task(QUERY_TASK_MARKER) {
            &self.query
        } else if req.is_task(PREDICTION_TASK_MARKER) {
            &self.prediction
        } else {
            return Err(LlmError::Protocol("unknown task".into()));
        };
        let i = req.attempt().min(script.len().saturating_sub(1));
        script.get(i).cloned().ok_or_else(|| LlmError::Unavailable("script exhausted".into()))
    }

    fn describe(&self) -> String {
        "stub:scripted".into()
    }
}

/// Always fails, for exercising the unavailable path.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableStub;

impl LlmEndpoint for UnavailableStub {
    fn complete(&self, _: &ChatRequest) -> Result<String, LlmError> {
        Err(LlmError::Unavailable("stub endpoint is offline".into()))
    }

    fn describe(&self) -> String {
        "stub:unavailable".into()
    }
}

/// Names accepted by [`stub_by_name`].
pub const STUB_NAMES: &[&str] = &["constant-velocity", "echo", "scripted", "unavailable"];

pub fn stub_by_name(name: &str) -> Option<Box<dyn LlmEndpoint>> {
    Some(match name {
        "constant-velocity" => Box::new(ConstantVelocityStub::default()),
        "echo" => Box::new(EchoStub),
        "scripted" => Box::new(ScriptedStub::default()),
        "unavailable" => Box::new(UnavailableStub),
        _ => return None,
    })
}
