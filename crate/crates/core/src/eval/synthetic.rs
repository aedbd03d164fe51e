//! Synthetic stores with exactly known motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::store::{EntityRecord, KnowledgeStore, StoreConfig, VehicleClass, VehicleRecord};
use crate::time::Timestamp;

/// 2023-09-24T00:00:00Z
pub const SYNTHETIC_EPOCH: Timestamp = Timestamp::from_millis(1_695_513_600_000);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub vehicles: usize,
    pub steps: usize,
    pub step_seconds: f64,
    pub seed: u64,
    /// Vehicles start inside a square of this side, m.
    pub area: f64,
    pub max_speed: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { vehicles: 25, steps: 40, step_seconds: 1.0, seed: 0, area: 2000.0, max_speed: 20.0 }
    }
}

pub fn frame_time(i: usize, step_seconds: f64) -> Timestamp {
    SYNTHETIC_EPOCH.plus_millis((i as f64 * step_seconds * 1000.0).round() as i64)
}

/// A vehicle at frame `i` of a constant-velocity track.
pub fn cv_vehicle(id: &str, i: usize, start: (f64, f64), v: (f64, f64), step_seconds: f64) -> EntityRecord {
    let s = step_seconds * i as f64;
    EntityRecord::Vehicles(VehicleRecord {
        entity_id: id.to_string(),
        timestamp: frame_time(i, step_seconds),
        x: start.0 + v.0 * s,
        y: start.1 + v.1 * s,
        vx: v.0,
        vy: v.1,
        ax: 0.0,
        ay: 0.0,
        class: VehicleClass::Car,
    })
}

/// Vehicles moving in straight lines at constant velocity.
pub fn constant_velocity_store(cfg: &SyntheticConfig) -> KnowledgeStore {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = KnowledgeStore::new(StoreConfig::default());
    for v in 0..cfg.vehicles {
        let id = format!("veh-{v:04}");
        let start = (rng.random_range(0.0..cfg.area), rng.random_range(0.0..cfg.area));
        let speed = rng.random_range(1.0..cfg.max_speed);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let vel = (speed * heading.cos(), speed * heading.sin());
        for i in 0..cfg.steps {
            store.insert(cv_vehicle(&id, i, start, vel, cfg.step_seconds)).expect("synthetic rows are valid");
        }
    }
    store
}

/// An ego on the +x axis with `history + 1` frames, `near` vehicles within
/// 30 m and `far` vehicles between 30 m and 100 m at the last frame.
/// Returns the store and the anchor instant.
pub fn ring_scene(near: usize, far: usize, history: usize, seed: u64) -> (KnowledgeStore, Timestamp) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = KnowledgeStore::new(StoreConfig::default());
    let dt = 1.0;
    for i in 0..=history {
        store.insert(cv_vehicle("ego", i, (0.0, 0.0), (5.0, 0.0), dt)).unwrap();
    }
    let t_idx = history;
    let ego_x = 5.0 * t_idx as f64;
    let mut place = |id: String, lo: f64, hi: f64| {
        let r = rng.random_range(lo..hi);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let p = (ego_x + r * a.cos(), r * a.sin());
        store.insert(cv_vehicle(&id, t_idx, (p.0, p.1), (0.0, 0.0), dt)).unwrap();
    };
    for n in 0..near {
        place(format!("near-{n}"), 1.0, 29.0);
    }
    for f in 0..far {
        place(format!("far-{f}"), 31.0, 99.0);
    }
    (store, frame_time(t_idx, dt))
}
