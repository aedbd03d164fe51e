//! Replay scenarios: one per (ego, anchor frame) with full history and
//! ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::store::{KnowledgeStore, Table};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Earlier frames required before the anchor.
    pub history: usize,
    /// Prediction horizons in frames, ascending.
    pub horizons: Vec<usize>,
    pub perception_radius: f64,
    /// Keep at most this many scenarios, sampled with `seed`.
    pub max_scenarios: Option<usize>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { history: 5, horizons: vec![3, 5, 10], perception_radius: 30.0, max_scenarios: None, seed: 0 }
    }
}

impl ScenarioConfig {
    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ego_id: String,
    pub t: Timestamp,
    pub horizons: Vec<usize>,
    pub perception_radius: f64,
    /// Ego positions for the next `max(horizons)` frames.
    pub ground_truth: Vec<Point>,
}

/// Every vehicle frame with `history` earlier frames and `max(horizons)`
/// later ones, ordered by (entity, time). A trajectory of `n` frames gives
/// `max(0, n − history − max_horizon)` scenarios.
pub fn enumerate_scenarios(store: &KnowledgeStore, cfg: &ScenarioConfig) -> Vec<Scenario> {
    let maxh = cfg.max_horizon();
    let mut out = Vec::new();
    if maxh == 0 {
        return out;
    }
    for ego in store.entities(Table::Vehicles) {
        let track = store.track(Table::Vehicles, ego);
        let n = track.len();
        if n < cfg.history + maxh + 1 {
            continue;
        }
        for i in cfg.history..n - maxh {
            let Some(t) = track[i].timestamp() else { continue };
            let ground_truth = track[i + 1..=i + maxh].iter().filter_map(|r| r.position()).collect();
            out.push(Scenario {
                ego_id: ego.to_string(),
                t,
                horizons: cfg.horizons.clone(),
                perception_radius: cfg.perception_radius,
                ground_truth,
            });
        }
    }
    match cfg.max_scenarios {
        Some(k) if k < out.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut keep = rand::seq::index::sample(&mut rng, out.len(), k).into_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| out[i].clone()).collect()
        }
        _ => out,
    }
}
