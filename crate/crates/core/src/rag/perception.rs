//! What the ego vehicle knows on its own at one instant.

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::store::{EntityRecord, KnowledgeStore, RowKey, Table};
use crate::time::Timestamp;
use crate::verbalize::EgoPose;

use super::RagError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
}

impl EgoState {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    fn of(rec: &EntityRecord) -> Option<EgoState> {
        match rec {
            EntityRecord::Vehicles(v) => Some(EgoState { x: v.x, y: v.y, vx: v.vx, vy: v.vy, ax: v.ax, ay: v.ay }),
            EntityRecord::Pedestrians(p) => {
                Some(EgoState { x: p.x, y: p.y, vx: p.vx, vy: p.vy, ax: p.ax.unwrap_or(0.0), ay: p.ay.unwrap_or(0.0) })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: Timestamp,
    pub state: EgoState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionSnapshot {
    pub ego_id: String,
    pub t: Timestamp,
    pub ego_state: EgoState,
    /// Up to `H` earlier states, oldest first.
    pub ego_history: Vec<HistoryEntry>,
    /// Vehicles and pedestrians within `radius` of the ego at `t`.
    pub visible: Vec<EntityRecord>,
    pub radius: f64,
}

impl PerceptionSnapshot {
    pub fn pose(&self) -> EgoPose {
        EgoPose::from_velocity(self.ego_state.position(), self.ego_state.vx, self.ego_state.vy)
    }
}

const MOVERS: [Table; 2] = [Table::Vehicles, Table::Pedestrians];

/// Ego state at `t` plus its recent history and the participants in range.
pub fn build_snapshot(
    store: &KnowledgeStore,
    ego_id: &str,
    t: Timestamp,
    radius: f64,
    history: usize,
) -> Result<PerceptionSnapshot, RagError> {
    let key = RowKey(format!("{ego_id}@{t}"));
    let (table, rec) = MOVERS
        .iter()
        .find_map(|&tb| store.query_by_key(tb, &key).map(|r| (tb, r)))
        .ok_or_else(|| RagError::EgoNotFound { ego_id: ego_id.to_string(), t })?;
    let ego_state = EgoState::of(rec).expect("movers carry kinematics");

    let track = store.track(table, ego_id);
    let before = track.partition_point(|r| r.timestamp().is_some_and(|ts| ts < t));
    let ego_history = track[before.saturating_sub(history)..before]
        .iter()
        .filter_map(|r| Some(HistoryEntry { t: r.timestamp()?, state: EgoState::of(r)? }))
        .collect();

    let mut visible = Vec::new();
    for tb in MOVERS {
        for r in store.query_radius(tb, ego_state.position(), radius, t, t)? {
            if !(tb == table && r.entity_id() == ego_id) {
                visible.push(r.clone());
            }
        }
    }
    Ok(PerceptionSnapshot { ego_id: ego_id.to_string(), t, ego_state, ego_history, visible, radius })
}
