//! Retrieval-augmented prediction over a pluggable chat endpoint.

pub mod cycle;
pub mod http;
pub mod llm;
pub mod perception;
pub mod prompt;
pub mod stubs;

use thiserror::Error;

use crate::query::QueryError;
use crate::store::StoreError;
use crate::time::Timestamp;

pub use cycle::{
    generate_query, parse_prediction, predict, run_proactive_cycle, template_query, write_cycle_log, CycleConfig,
    CycleOutput, Exchange, GeneratedQuery, Mode, PredictionResult, Recorder, Retrieval,
};
pub use http::{HttpConfig, HttpEndpoint};
pub use llm::{ChatMessage, ChatRequest, LlmEndpoint, LlmError, Role};
pub use perception::{build_snapshot, EgoState, HistoryEntry, PerceptionSnapshot};
pub use prompt::{combine, PromptBundle, PROMPT_VERSION};
pub use stubs::{stub_by_name, ConstantVelocityStub, EchoStub, ScriptedStub, UnavailableStub, STUB_NAMES};

#[derive(Debug, Error)]
pub enum RagError {
    #[error("ego {ego_id} has no record at {t}")]
    EgoNotFound { ego_id: String, t: Timestamp },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("{0}")]
    EndpointUnavailable(String),
    #[error("malformed prediction: {0:?}")]
    MalformedPrediction(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RagError {
    /// Stable failure class used in reports.
    pub fn class(&self) -> &'static str {
        match self {
            RagError::EgoNotFound { .. } => "ego_not_found",
            RagError::InvalidHorizon => "invalid_horizon",
            RagError::EndpointUnavailable(_) => "endpoint_unavailable",
            RagError::MalformedPrediction(_) => "malformed_prediction",
            RagError::Query(_) => "query",
            RagError::Store(_) => "store",
            RagError::Io(_) => "io",
        }
    }
}
