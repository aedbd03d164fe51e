//! Versioned prompt templates and deterministic prompt assembly.

use serde::{Deserialize, Serialize};

use crate::verbalize::{verbalize_result_set_for, EMPTY_RESULT};

use super::perception::PerceptionSnapshot;

pub const PROMPT_VERSION: &str = "v1";

pub const SYSTEM: &str = include_str!("../../prompts/v1/system.txt");
pub const QUERY_TASK: &str = include_str!("../../prompts/v1/query_task.txt");
pub const QUERY_REPAIR: &str = include_str!("../../prompts/v1/query_repair.txt");
pub const PREDICTION_TASK: &str = include_str!("../../prompts/v1/prediction_task.txt");
pub const PREDICTION_FORMAT: &str = include_str!("../../prompts/v1/prediction_format.txt");
pub const PREDICTION_REPAIR: &str = include_str!("../../prompts/v1/prediction_repair.txt");

/// Substitute `{{name}}` slots. Unknown slots are left in place.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in slots {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out.trim_end().to_string()
}

/// The ego and visible-participant section shared by both tasks. Ego
/// numbers are written at full precision; other participants use the
/// two-decimal sentences.
pub fn perception_block(s: &PerceptionSnapshot) -> String {
    let e = &s.ego_state;
    let mut out = format!(
        "EGO VEHICLE\nid: {}\ntime: {}\nposition: ({}, {})\nvelocity: ({}, {}) m/s\nacceleration: ({}, {}) m/s²\n",
        s.ego_id,
        s.t.to_sentence_form(),
        e.x,
        e.y,
        e.vx,
        e.vy,
        e.ax,
        e.ay
    );
    out.push_str("\nHISTORY (oldest first)\n");
    if s.ego_history.is_empty() {
        out.push_str("none\n");
    }
    for h in &s.ego_history {
        out.push_str(&format!(
            "{}: position ({}, {}), velocity ({}, {})\n",
            h.t.to_sentence_form(),
            h.state.x,
            h.state.y,
            h.state.vx,
            h.state.vy
        ));
    }
    out.push_str(&format!("\nVISIBLE PARTICIPANTS (within {} m)\n", s.radius));
    out.push_str(&verbalize_result_set_for(&s.visible, &s.pose()));
    out
}

pub fn query_prompt(s: &PerceptionSnapshot) -> String {
    fill(QUERY_TASK, &[("perception", &perception_block(s))])
}

/// Conditional input for the prediction call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    /// Task instructions, reasoning scaffold and the ego's own perception.
    pub x: String,
    /// Verbalized retrieval result; [`EMPTY_RESULT`] when nothing was retrieved.
    pub k: String,
    pub output_format: String,
    /// Reserved for visual inputs; never populated here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<serde_json::Value>,
}

impl PromptBundle {
    /// The user message sent to the endpoint.
    pub fn user_message(&self) -> String {
        format!("{}\n\nRETRIEVED KNOWLEDGE\n{}\n\n{}", self.x, self.k, self.output_format)
    }
}

/// Join perception and retrieved knowledge into the prediction prompt.
pub fn combine(s: &PerceptionSnapshot, e_text: &str, horizon: usize, step_seconds: f64) -> PromptBundle {
    let h = horizon.to_string();
    let dt = step_seconds.to_string();
    let x = fill(PREDICTION_TASK, &[("horizon", &h), ("step_seconds", &dt), ("perception", &perception_block(s))]);
    let k = if e_text.trim().is_empty() { EMPTY_RESULT.to_string() } else { e_text.to_string() };
    PromptBundle { x, k, output_format: fill(PREDICTION_FORMAT, &[("horizon", &h)]), attachment: None }
}
