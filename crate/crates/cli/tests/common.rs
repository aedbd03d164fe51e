#![allow(dead_code)]

use std::path::Path;

use envkb::store::{
    EntityRecord, KnowledgeStore, SignalState, StoreConfig, TrafficSignalRecord, VehicleClass, VehicleRecord,
};
use envkb::time::Timestamp;

pub const SIGNAL_SENTENCE: &str = "Retrieve the traffic signal status for the current road segment.";
pub const T0: &str = "2023-09-24T00:01:17Z";

pub fn t(offset_s: i64) -> Timestamp {
    Timestamp::parse(T0).unwrap().plus_millis(offset_s * 1000)
}

/// Ego driving east at 2 m/s for six frames, a red signal 10 m ahead at
/// every frame and a parked truck 60 m away.
pub fn scene() -> KnowledgeStore {
    let mut s = KnowledgeStore::new(StoreConfig::default());
    for i in 0..6 {
        let tt = t(i);
        let x = 2.0 * i as f64;
        s.insert(EntityRecord::Vehicles(VehicleRecord {
            entity_id: "ego".into(),
            timestamp: tt,
            x,
            y: 0.0,
            vx: 2.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            class: VehicleClass::Car,
        }))
        .unwrap();
        s.insert(EntityRecord::Vehicles(VehicleRecord {
            entity_id: "truck".into(),
            timestamp: tt,
            x: x + 60.0,
            y: 0.0,
            vx: 0.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            class: VehicleClass::Truck,
        }))
        .unwrap();
        s.insert(EntityRecord::TrafficSignals(TrafficSignalRecord {
            signal_id: "sig-1".into(),
            timestamp: tt,
            state: SignalState::Red,
            day_of_week: tt.iso_weekday().unwrap(),
            x: x + 10.0,
            y: 0.0,
        }))
        .unwrap();
    }
    s
}

pub fn write_scene(path: &Path) {
    scene().save(path).unwrap();
}
