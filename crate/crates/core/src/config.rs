//! Run configuration loaded from TOML, with environment overrides for the
//! endpoint URL and API key.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/exp1"
//! store_snapshot = "data/store.jsonl"
//!
//! [datasets]
//! trajectories = "data/tracks.csv"
//! mapping = "data/mapping.toml"
//!
//! [endpoint]
//! kind = "http"
//! model = "gpt-4o"
//! base_url = "https://api.example.com/v1"
//! timeout_secs = 30
//! retries = 2
//!
//! [cycle]
//! perception_radius = 30
//! retrieval_radius = 100
//! history = 5
//! step_seconds = 1.0
//!
//! [eval]
//! horizons = [3, 5, 10]
//! workers = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ExperimentConfig;
use crate::rag::{
    stub_by_name, ConstantVelocityStub, CycleConfig, HttpConfig, HttpEndpoint, LlmEndpoint, ScriptedStub,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub kind: EndpointKind,
    /// Stub name when `kind = "stub"`.
    pub stub: String,
    /// Constant offset added by the constant-velocity stub, m.
    pub stub_offset: Option<(f64, f64)>,
    /// Replies for the scripted stub.
    pub script: Option<ScriptedStub>,
    pub model: String,
    pub temperature: f64,
    #[serde(flatten)]
    pub http: HttpConfig,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            kind: EndpointKind::Stub,
            stub: "constant-velocity".into(),
            stub_offset: None,
            script: None,
            model: "stub".into(),
            temperature: 0.0,
            http: HttpConfig::default(),
        }
    }
}

impl EndpointConfig {
    pub fn build(&self) -> Result<Box<dyn LlmEndpoint>, ConfigError> {
        match self.kind {
            EndpointKind::Http => HttpEndpoint::new(self.http.clone())
                .map(|e| Box::new(e) as Box<dyn LlmEndpoint>)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            EndpointKind::Stub => match (self.stub.as_str(), &self.script, self.stub_offset) {
                ("scripted", Some(s), _) => Ok(Box::new(s.clone())),
                ("constant-velocity", _, Some(offset)) => Ok(Box::new(ConstantVelocityStub { offset })),
                (name, _, _) => {
                    stub_by_name(name).ok_or_else(|| ConfigError::Invalid(format!("unknown stub {name:?}")))
                }
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub trajectories: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub signals: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub horizons: Vec<usize>,
    pub max_scenarios: Option<usize>,
    pub workers: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { horizons: vec![3, 5, 10], max_scenarios: None, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub store_snapshot: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub datasets: DatasetConfig,
    pub endpoint: EndpointConfig,
    pub cycle: CycleConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            store_snapshot: None,
            output_dir: PathBuf::from("runs"),
            seed: 0,
            datasets: DatasetConfig::default(),
            endpoint: EndpointConfig::default(),
            cycle: CycleConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// Parse, apply environment overrides, then validate. Relative paths are
    /// taken relative to the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse and apply environment overrides without touching the filesystem.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.endpoint.http = cfg.endpoint.http.with_env_overrides();
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.store_snapshot,
            &mut self.datasets.trajectories,
            &mut self.datasets.weather,
            &mut self.datasets.signals,
            &mut self.datasets.mapping,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for p in [
            &self.store_snapshot,
            &self.datasets.trajectories,
            &self.datasets.weather,
            &self.datasets.signals,
            &self.datasets.mapping,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return invalid(format!("path does not exist: {}", p.display()));
            }
        }
        if !self.cycle.perception_radius.is_finite() || self.cycle.perception_radius <= 0.0 {
            return invalid("cycle.perception_radius must be positive".into());
        }
        if !self.cycle.retrieval_radius.is_finite() || self.cycle.retrieval_radius <= 0.0 {
            return invalid("cycle.retrieval_radius must be positive".into());
        }
        let h = &self.eval.horizons;
        if h.is_empty() || h[0] == 0 || h.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("eval.horizons must be non-empty, positive and ascending".into());
        }
        if self.eval.workers == 0 {
            return invalid("eval.workers must be at least 1".into());
        }
        Ok(())
    }

    /// Cycle settings with the endpoint's model and the run seed applied.
    pub fn cycle_config(&self) -> CycleConfig {
        CycleConfig {
            model: self.endpoint.model.clone(),
            temperature: self.endpoint.temperature,
            seed: Some(self.seed),
            ..self.cycle.clone()
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            horizons: self.eval.horizons.clone(),
            max_scenarios: self.eval.max_scenarios,
            seed: self.seed,
            workers: self.eval.workers,
            cycle: self.cycle_config(),
            run_dir: Some(self.output_dir.clone()),
            ..ExperimentConfig::default()
        }
    }
}
