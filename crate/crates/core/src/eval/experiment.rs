//! Baseline-versus-retrieval replay over a scenario set.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::rag::{run_proactive_cycle, write_cycle_log, CycleConfig, LlmEndpoint, Mode};
use crate::store::KnowledgeStore;

use super::metrics::{ade, fde};
use super::report::{ArmReport, HorizonMetrics, MetricReport, REPORT_SCHEMA_VERSION};
use super::scenario::{enumerate_scenarios, Scenario, ScenarioConfig};
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizons: Vec<usize>,
    pub max_scenarios: Option<usize>,
    /// Subsampling seed.
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    pub arms: Vec<Mode>,
    pub cycle: CycleConfig,
    /// When set, each cycle's transcript is written below `run_dir/cycles`.
    pub run_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            horizons: vec![3, 5, 10],
            max_scenarios: None,
            seed: 0,
            workers: 1,
            arms: vec![Mode::Baseline, Mode::Senserag],
            cycle: CycleConfig::default(),
            run_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            history: self.cycle.history,
            horizons: self.horizons.clone(),
            perception_radius: self.cycle.perception_radius,
            max_scenarios: self.max_scenarios,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.horizons.is_empty() || self.horizons[0] == 0 || self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidConfig("horizons must be non-empty, positive and ascending".into()));
        }
        if self.arms.is_empty() {
            return Err(EvalError::InvalidConfig("at least one arm is required".into()));
        }
        if self.workers == 0 {
            return Err(EvalError::InvalidConfig("workers must be at least 1".into()));
        }
        if !(self.cycle.perception_radius > 0.0 && self.cycle.retrieval_radius > 0.0) {
            return Err(EvalError::InvalidConfig("radii must be positive".into()));
        }
        if !(self.cycle.step_seconds > 0.0 && self.cycle.step_seconds.is_finite()) {
            return Err(EvalError::InvalidConfig("step_seconds must be positive".into()));
        }
        Ok(())
    }
}

type Outcome = Result<Vec<Point>, &'static str>;

fn run_one(
    store: &KnowledgeStore,
    llm: &dyn LlmEndpoint,
    cfg: &ExperimentConfig,
    sc: &Scenario,
    mode: Mode,
) -> Outcome {
    let h = sc.ground_truth.len();
    match run_proactive_cycle(store, &sc.ego_id, sc.t, h, llm, mode, &cfg.cycle) {
        Ok(out) => {
            if let Some(dir) = &cfg.run_dir {
                if let Err(e) = write_cycle_log(&dir.join("cycles"), &out) {
                    tracing::warn!(error = %e, "could not write cycle log");
                }
            }
            Ok(out.prediction.points)
        }
        Err(e) => {
            tracing::debug!(ego = %sc.ego_id, t = %sc.t, arm = mode.name(), error = %e, "cycle failed");
            Err(e.class())
        }
    }
}

fn summarize(mode: Mode, horizons: &[usize], scenarios: &[Scenario], outcomes: &[Outcome]) -> ArmReport {
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut sums = vec![(0.0f64, 0.0f64); horizons.len()];
    let mut successes = 0;
    for (sc, o) in scenarios.iter().zip(outcomes) {
        match o {
            Ok(points) => {
                successes += 1;
                for (i, &h) in horizons.iter().enumerate() {
                    let (p, g) = (&points[..h], &sc.ground_truth[..h]);
                    sums[i].0 += ade(p, g).expect("lengths match by construction");
                    sums[i].1 += fde(p, g).expect("lengths match by construction");
                }
            }
            Err(class) => *failures.entry(class.to_string()).or_default() += 1,
        }
    }
    let mean = |s: f64| (successes > 0).then(|| s / successes as f64);
    let metrics = horizons
        .iter()
        .zip(&sums)
        .map(|(&horizon, &(a, f))| HorizonMetrics { horizon, ade: mean(a), fde: mean(f), n: successes })
        .collect();
    ArmReport { arm: mode, successes, failures, metrics }
}

/// Run every scenario through each arm and average ADE/FDE per horizon.
/// Failed cycles are counted per class and left out of the means.
pub fn run_experiment(
    store: &KnowledgeStore,
    llm: &dyn LlmEndpoint,
    cfg: &ExperimentConfig,
) -> Result<MetricReport, EvalError> {
    cfg.validate()?;
    let scenarios = enumerate_scenarios(store, &cfg.scenario_config());
    if scenarios.is_empty() {
        return Err(EvalError::NoScenarios);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let jobs: Vec<(usize, Mode)> = cfg.arms.iter().flat_map(|&m| (0..scenarios.len()).map(move |i| (i, m))).collect();
    let outcomes: Vec<Outcome> =
        pool.install(|| jobs.par_iter().map(|&(i, m)| run_one(store, llm, cfg, &scenarios[i], m)).collect());
    let arms = cfg
        .arms
        .iter()
        .enumerate()
        .map(|(k, &mode)| {
            let slice = &outcomes[k * scenarios.len()..(k + 1) * scenarios.len()];
            summarize(mode, &cfg.horizons, &scenarios, slice)
        })
        .collect();
    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario_count: scenarios.len(),
        horizons: cfg.horizons.clone(),
        arms,
    })
}
