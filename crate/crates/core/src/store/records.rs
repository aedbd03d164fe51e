//! Row types for the seven environmental tables plus harmonized text records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::time::Timestamp;

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Vehicles,
    Pedestrians,
    Weather,
    TrafficSignals,
    TrafficSigns,
    Intersections,
    Phases,
    Harmonized,
}

impl Table {
    pub const ALL: [Table; 8] = [
        Table::Vehicles,
        Table::Pedestrians,
        Table::Weather,
        Table::TrafficSignals,
        Table::TrafficSigns,
        Table::Intersections,
        Table::Phases,
        Table::Harmonized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::Vehicles => "vehicles",
            Table::Pedestrians => "pedestrians",
            Table::Weather => "weather",
            Table::TrafficSignals => "traffic_signals",
            Table::TrafficSigns => "traffic_signs",
            Table::Intersections => "intersections",
            Table::Phases => "phases",
            Table::Harmonized => "harmonized",
        }
    }

    /// Column names as exposed to queries and SQL.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Table::Vehicles => &["entity_id", "timestamp", "x", "y", "vx", "vy", "ax", "ay", "class"],
            Table::Pedestrians => &["entity_id", "timestamp", "x", "y", "vx", "vy", "ax", "ay"],
            Table::Weather => &[
                "timestamp",
                "country",
                "state",
                "city",
                "temperature",
                "wind_speed",
                "wind_direction",
                "precipitation",
                "visibility",
                "sunlight",
            ],
            Table::TrafficSignals => &["signal_id", "timestamp", "state", "day_of_week", "x", "y"],
            Table::TrafficSigns => &["sign_id", "type", "x", "y"],
            Table::Intersections => &["intersection_id", "country", "state", "city", "x", "y"],
            Table::Phases => &["phase_id", "signal_id", "start_offset", "duration", "state"],
            Table::Harmonized => &["tau", "lx", "ly", "v_text", "ref_table", "ref_key"],
        }
    }

    pub fn has_column(self, column: &str) -> bool {
        self.columns().contains(&column)
    }

    /// Names of the (x, y) columns, for tables that carry a position.
    pub fn position_columns(self) -> Option<(&'static str, &'static str)> {
        match self {
            Table::Weather | Table::Phases => None,
            Table::Harmonized => Some(("lx", "ly")),
            _ => Some(("x", "y")),
        }
    }

    pub fn time_column(self) -> Option<&'static str> {
        match self {
            Table::TrafficSigns | Table::Intersections | Table::Phases => None,
            Table::Harmonized => Some("tau"),
            _ => Some("timestamp"),
        }
    }

    /// The column that identifies the entity a row describes.
    pub fn entity_column(self) -> &'static str {
        match self {
            Table::Vehicles | Table::Pedestrians => "entity_id",
            Table::Weather => "city",
            Table::TrafficSignals => "signal_id",
            Table::TrafficSigns => "sign_id",
            Table::Intersections => "intersection_id",
            Table::Phases => "phase_id",
            Table::Harmonized => "ref_key",
        }
    }

    pub fn is_spatial(self) -> bool {
        self.position_columns().is_some()
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Table {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Table::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| StoreError::UnknownTable(s.to_string()))
    }
}

/// Stable identifier of a stored row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowKey(pub String);

impl RowKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RowKey {
    fn from(s: &str) -> Self {
        RowKey(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Car,
    Truck,
    Bus,
    Bike,
    #[default]
    Unknown,
}

impl VehicleClass {
    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Truck => "truck",
            VehicleClass::Bus => "bus",
            VehicleClass::Bike => "bike",
            VehicleClass::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" | "vehicle" => Some(VehicleClass::Car),
            "truck" => Some(VehicleClass::Truck),
            "bus" => Some(VehicleClass::Bus),
            "bike" | "bicycle" | "cyclist" | "motorcycle" => Some(VehicleClass::Bike),
            "unknown" | "" => Some(VehicleClass::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalState {
    Red,
    Yellow,
    Green,
    Off,
}

impl SignalState {
    pub fn name(self) -> &'static str {
        match self {
            SignalState::Red => "red",
            SignalState::Yellow => "yellow",
            SignalState::Green => "green",
            SignalState::Off => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "red" => Some(SignalState::Red),
            "yellow" | "amber" => Some(SignalState::Yellow),
            "green" => Some(SignalState::Green),
            "off" | "dark" => Some(SignalState::Off),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignType {
    Stop,
    Yield,
    SpeedLimit,
    NoEntry,
    Crosswalk,
    Other,
}

impl SignType {
    pub fn name(self) -> &'static str {
        match self {
            SignType::Stop => "stop",
            SignType::Yield => "yield",
            SignType::SpeedLimit => "speed_limit",
            SignType::NoEntry => "no_entry",
            SignType::Crosswalk => "crosswalk",
            SignType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub entity_id: String,
    pub timestamp: Timestamp,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    #[serde(default)]
    pub class: VehicleClass,
}

impl VehicleRecord {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianRecord {
    pub entity_id: String,
    pub timestamp: Timestamp,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(default)]
    pub ax: Option<f64>,
    #[serde(default)]
    pub ay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: Timestamp,
    pub country: String,
    pub state: String,
    pub city: String,
    pub temperature: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub precipitation: f64,
    pub visibility: f64,
    #[serde(default)]
    pub sunlight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSignalRecord {
    pub signal_id: String,
    pub timestamp: Timestamp,
    pub state: SignalState,
    pub day_of_week: u8,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSignRecord {
    pub sign_id: String,
    #[serde(rename = "type")]
    pub sign_type: SignType,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRecord {
    pub intersection_id: String,
    pub country: String,
    pub state: String,
    pub city: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase_id: String,
    pub signal_id: String,
    pub start_offset: f64,
    pub duration: f64,
    pub state: SignalState,
}

/// Reference from a harmonized record to the structured row it describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuredRef {
    pub table: Table,
    pub key: RowKey,
}

/// Verbalized descriptor tied to a structured row at (tau, lx, ly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizedRecord {
    pub tau: Timestamp,
    pub lx: f64,
    pub ly: f64,
    pub v_text: String,
    pub structured_ref: StructuredRef,
}

/// A row of any table. Serialized with a `table` discriminator field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "snake_case")]
pub enum EntityRecord {
    Vehicles(VehicleRecord),
    Pedestrians(PedestrianRecord),
    Weather(WeatherRecord),
    TrafficSignals(TrafficSignalRecord),
    TrafficSigns(TrafficSignRecord),
    Intersections(IntersectionRecord),
    Phases(PhaseRecord),
    Harmonized(HarmonizedRecord),
}

/// A scalar read out of a record column.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
    Time(Timestamp),
    Null,
}

impl Value {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Number(n) => {
                serde_json::Number::from_f64(*n).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
            }
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Time(t) => serde_json::Value::String(t.to_string()),
            Value::Null => serde_json::Value::Null,
        }
    }
}

/// Limits applied when validating rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub vehicle_max_speed: f64,
    pub pedestrian_max_speed: f64,
    pub epoch_start: Timestamp,
    pub epoch_end: Timestamp,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            vehicle_max_speed: 60.0,
            pedestrian_max_speed: 15.0,
            // 1970-01-01 .. 2100-01-01
            epoch_start: Timestamp::from_millis(0),
            epoch_end: Timestamp::from_millis(4_102_444_800_000),
        }
    }
}

fn finite(table: Table, field: &'static str, v: f64) -> Result<(), StoreError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(StoreError::InvariantViolation { table, field })
    }
}

fn check(table: Table, field: &'static str, ok: bool) -> Result<(), StoreError> {
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvariantViolation { table, field })
    }
}

fn non_empty(table: Table, field: &'static str, s: &str) -> Result<(), StoreError> {
    check(table, field, !s.trim().is_empty())
}

impl EntityRecord {
    pub fn table(&self) -> Table {
        match self {
            EntityRecord::Vehicles(_) => Table::Vehicles,
            EntityRecord::Pedestrians(_) => Table::Pedestrians,
            EntityRecord::Weather(_) => Table::Weather,
            EntityRecord::TrafficSignals(_) => Table::TrafficSignals,
            EntityRecord::TrafficSigns(_) => Table::TrafficSigns,
            EntityRecord::Intersections(_) => Table::Intersections,
            EntityRecord::Phases(_) => Table::Phases,
            EntityRecord::Harmonized(_) => Table::Harmonized,
        }
    }

    pub fn key(&self) -> RowKey {
        let k = match self {
            EntityRecord::Vehicles(r) => format!("{}@{}", r.entity_id, r.timestamp),
            EntityRecord::Pedestrians(r) => format!("{}@{}", r.entity_id, r.timestamp),
            EntityRecord::Weather(r) => {
                format!("{}/{}/{}@{}", r.country, r.state, r.city, r.timestamp)
            }
            EntityRecord::TrafficSignals(r) => format!("{}@{}", r.signal_id, r.timestamp),
            EntityRecord::TrafficSigns(r) => r.sign_id.clone(),
            EntityRecord::Intersections(r) => r.intersection_id.clone(),
            EntityRecord::Phases(r) => r.phase_id.clone(),
            EntityRecord::Harmonized(r) => format!("{}:{}@{}", r.structured_ref.table, r.structured_ref.key, r.tau),
        };
        RowKey(k)
    }

    pub fn position(&self) -> Option<Point> {
        match self {
            EntityRecord::Vehicles(r) => Some(Point::new(r.x, r.y)),
            EntityRecord::Pedestrians(r) => Some(Point::new(r.x, r.y)),
            EntityRecord::TrafficSignals(r) => Some(Point::new(r.x, r.y)),
            EntityRecord::TrafficSigns(r) => Some(Point::new(r.x, r.y)),
            EntityRecord::Intersections(r) => Some(Point::new(r.x, r.y)),
            EntityRecord::Harmonized(r) => Some(Point::new(r.lx, r.ly)),
            EntityRecord::Weather(_) | EntityRecord::Phases(_) => None,
        }
    }

    pub fn timestamp(&self) -> Option<Timestamp> {
        match self {
            EntityRecord::Vehicles(r) => Some(r.timestamp),
            EntityRecord::Pedestrians(r) => Some(r.timestamp),
            EntityRecord::Weather(r) => Some(r.timestamp),
            EntityRecord::TrafficSignals(r) => Some(r.timestamp),
            EntityRecord::Harmonized(r) => Some(r.tau),
            EntityRecord::TrafficSigns(_) | EntityRecord::Intersections(_) | EntityRecord::Phases(_) => None,
        }
    }

    pub fn entity_id(&self) -> &str {
        match self {
            EntityRecord::Vehicles(r) => &r.entity_id,
            EntityRecord::Pedestrians(r) => &r.entity_id,
            EntityRecord::Weather(r) => &r.city,
            EntityRecord::TrafficSignals(r) => &r.signal_id,
            EntityRecord::TrafficSigns(r) => &r.sign_id,
            EntityRecord::Intersections(r) => &r.intersection_id,
            EntityRecord::Phases(r) => &r.phase_id,
            EntityRecord::Harmonized(r) => r.structured_ref.key.as_str(),
        }
    }

    /// Read one column by name. `None` means the table has no such column.
    pub fn field(&self, name: &str) -> Option<Value> {
        use Value::*;
        let num = |v: f64| Some(Number(v));
        let text = |s: &str| Some(Text(s.to_string()));
        let opt = |v: Option<f64>| Some(v.map(Number).unwrap_or(Null));
        match self {
            EntityRecord::Vehicles(r) => match name {
                "entity_id" => text(&r.entity_id),
                "timestamp" => Some(Time(r.timestamp)),
                "x" => num(r.x),
                "y" => num(r.y),
                "vx" => num(r.vx),
                "vy" => num(r.vy),
                "ax" => num(r.ax),
                "ay" => num(r.ay),
                "class" => text(r.class.name()),
                _ => None,
            },
            EntityRecord::Pedestrians(r) => match name {
                "entity_id" => text(&r.entity_id),
                "timestamp" => Some(Time(r.timestamp)),
                "x" => num(r.x),
                "y" => num(r.y),
                "vx" => num(r.vx),
                "vy" => num(r.vy),
                "ax" => opt(r.ax),
                "ay" => opt(r.ay),
                _ => None,
            },
            EntityRecord::Weather(r) => match name {
                "timestamp" => Some(Time(r.timestamp)),
                "country" => text(&r.country),
                "state" => text(&r.state),
                "city" => text(&r.city),
                "temperature" => num(r.temperature),
                "wind_speed" => num(r.wind_speed),
                "wind_direction" => num(r.wind_direction),
                "precipitation" => num(r.precipitation),
                "visibility" => num(r.visibility),
                "sunlight" => opt(r.sunlight),
                _ => None,
            },
            EntityRecord::TrafficSignals(r) => match name {
                "signal_id" => text(&r.signal_id),
                "timestamp" => Some(Time(r.timestamp)),
                "state" => text(r.state.name()),
                "day_of_week" => num(r.day_of_week as f64),
                "x" => num(r.x),
                "y" => num(r.y),
                _ => None,
            },
            EntityRecord::TrafficSigns(r) => match name {
                "sign_id" => text(&r.sign_id),
                "type" => text(r.sign_type.name()),
                "x" => num(r.x),
                "y" => num(r.y),
                _ => None,
            },
            EntityRecord::Intersections(r) => match name {
                "intersection_id" => text(&r.intersection_id),
                "country" => text(&r.country),
                "state" => text(&r.state),
                "city" => text(&r.city),
                "x" => num(r.x),
                "y" => num(r.y),
                _ => None,
            },
            EntityRecord::Phases(r) => match name {
                "phase_id" => text(&r.phase_id),
                "signal_id" => text(&r.signal_id),
                "start_offset" => num(r.start_offset),
                "duration" => num(r.duration),
                "state" => text(r.state.name()),
                _ => None,
            },
            EntityRecord::Harmonized(r) => match name {
                "tau" => Some(Time(r.tau)),
                "lx" => num(r.lx),
                "ly" => num(r.ly),
                "v_text" => text(&r.v_text),
                "ref_table" => text(r.structured_ref.table.name()),
                "ref_key" => text(r.structured_ref.key.as_str()),
                _ => None,
            },
        }
    }

    /// Check the per-type invariants that do not depend on other rows.
    pub fn validate(&self, limits: &Limits) -> Result<(), StoreError> {
        let table = self.table();
        if let Some(ts) = self.timestamp() {
            if ts < limits.epoch_start || ts >= limits.epoch_end {
                return Err(StoreError::EpochOutOfBounds(ts));
            }
        }
        match self {
            EntityRecord::Vehicles(r) => {
                non_empty(table, "entity_id", &r.entity_id)?;
                for (f, v) in [("x", r.x), ("y", r.y), ("vx", r.vx), ("vy", r.vy), ("ax", r.ax), ("ay", r.ay)] {
                    finite(table, f, v)?;
                }
                check(table, "vx", r.speed() <= limits.vehicle_max_speed)?;
            }
            EntityRecord::Pedestrians(r) => {
                non_empty(table, "entity_id", &r.entity_id)?;
                for (f, v) in [("x", r.x), ("y", r.y), ("vx", r.vx), ("vy", r.vy)] {
                    finite(table, f, v)?;
                }
                if let Some(ax) = r.ax {
                    finite(table, "ax", ax)?;
                }
                if let Some(ay) = r.ay {
                    finite(table, "ay", ay)?;
                }
                check(table, "vx", r.vx.hypot(r.vy) <= limits.pedestrian_max_speed)?;
            }
            EntityRecord::Weather(r) => {
                non_empty(table, "city", &r.city)?;
                for (f, v) in [
                    ("temperature", r.temperature),
                    ("wind_speed", r.wind_speed),
                    ("wind_direction", r.wind_direction),
                    ("precipitation", r.precipitation),
                    ("visibility", r.visibility),
                ] {
                    finite(table, f, v)?;
                }
                if let Some(s) = r.sunlight {
                    finite(table, "sunlight", s)?;
                    check(table, "sunlight", s >= 0.0)?;
                }
                check(table, "wind_speed", r.wind_speed >= 0.0)?;
                check(table, "visibility", r.visibility >= 0.0)?;
                check(table, "precipitation", r.precipitation >= 0.0)?;
                check(table, "wind_direction", (0.0..360.0).contains(&r.wind_direction))?;
            }
            EntityRecord::TrafficSignals(r) => {
                non_empty(table, "signal_id", &r.signal_id)?;
                finite(table, "x", r.x)?;
                finite(table, "y", r.y)?;
                check(
                    table,
                    "day_of_week",
                    (1..=7).contains(&r.day_of_week) && r.timestamp.iso_weekday() == Some(r.day_of_week),
                )?;
            }
            EntityRecord::TrafficSigns(r) => {
                non_empty(table, "sign_id", &r.sign_id)?;
                finite(table, "x", r.x)?;
                finite(table, "y", r.y)?;
            }
            EntityRecord::Intersections(r) => {
                non_empty(table, "intersection_id", &r.intersection_id)?;
                finite(table, "x", r.x)?;
                finite(table, "y", r.y)?;
            }
            EntityRecord::Phases(r) => {
                non_empty(table, "phase_id", &r.phase_id)?;
                finite(table, "start_offset", r.start_offset)?;
                finite(table, "duration", r.duration)?;
                check(table, "duration", r.duration > 0.0)?;
            }
            EntityRecord::Harmonized(r) => {
                finite(table, "lx", r.lx)?;
                finite(table, "ly", r.ly)?;
                non_empty(table, "v_text", &r.v_text)?;
                check(table, "structured_ref", r.structured_ref.table != Table::Harmonized)?;
            }
        }
        Ok(())
    }
}

/// Total, deterministic result order: (timestamp, entity id, key).
/// Rows without a timestamp sort first.
pub fn result_order(a: &EntityRecord, b: &EntityRecord) -> std::cmp::Ordering {
    a.timestamp().cmp(&b.timestamp()).then_with(|| a.entity_id().cmp(b.entity_id())).then_with(|| a.key().cmp(&b.key()))
}
