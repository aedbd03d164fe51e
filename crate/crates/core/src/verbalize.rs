//! Deterministic natural-language rendering of retrieved rows.
//!
//! Numbers use fixed two-decimal formatting with round-half-away-from-zero,
//! independent of locale. Magnitudes are computed from the unrounded
//! components and rounded once.

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::store::{
    EntityRecord, HarmonizedRecord, IntersectionRecord, PedestrianRecord, PhaseRecord, Table, TrafficSignRecord,
    TrafficSignalRecord, VehicleRecord, WeatherRecord,
};

/// Sentence used whenever a result set is empty.
pub const EMPTY_RESULT: &str = "No matching environmental records.";

/// Two decimals, ties rounded away from zero, never "-0.00".
pub fn fmt2(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    // A binary double sits exactly on a thousandths tie only when 8·|v| is
    // an odd integer; every other value rounds the same under any rule.
    let eighths = v.abs() * 8.0;
    let s = if eighths.fract() == 0.0 && eighths < 9.0e15 && (eighths as u64) % 2 == 1 {
        let hundredths = (v.abs() * 100.0).ceil() / 100.0;
        format!("{:.2}", hundredths.copysign(v))
    } else {
        format!("{v:.2}")
    };
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Direction of a target relative to the ego heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bearing {
    Ahead,
    Left,
    Right,
    Behind,
}

impl Bearing {
    pub fn name(self) -> &'static str {
        match self {
            Bearing::Ahead => "ahead",
            Bearing::Left => "left",
            Bearing::Right => "right",
            Bearing::Behind => "behind",
        }
    }
}

/// Ego position and heading used to phrase other entities relative to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPose {
    pub position: Point,
    /// Heading in radians, counter-clockwise from +x.
    pub heading: f64,
}

impl EgoPose {
    /// Heading from a velocity vector; a stationary ego faces +x.
    pub fn from_velocity(position: Point, vx: f64, vy: f64) -> Self {
        let heading = if vx.hypot(vy) > 1e-9 { vy.atan2(vx) } else { 0.0 };
        EgoPose { position, heading }
    }
}

/// ahead: |angle| ≤ 45°; left: 45° < angle ≤ 135°; right: −135° ≤ angle < −45°;
/// behind otherwise. Angles are counter-clockwise from the ego heading.
pub fn bearing(ego: &EgoPose, target: Point) -> Bearing {
    let dx = target.x - ego.position.x;
    let dy = target.y - ego.position.y;
    let mut a = (dy.atan2(dx) - ego.heading).to_degrees();
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    if a.abs() <= 45.0 {
        Bearing::Ahead
    } else if a > 45.0 && a <= 135.0 {
        Bearing::Left
    } else if (-135.0..-45.0).contains(&a) {
        Bearing::Right
    } else {
        Bearing::Behind
    }
}

pub fn verbalize_vehicle(rec: &VehicleRecord) -> String {
    format!(
        "At timestamp {}, a vehicle was located at ({}, {}) with a velocity of ({}, {}) m/s and a speed magnitude of {} m/s. The vehicle experienced an acceleration of ({}, {}) m/s² with a magnitude of {} m/s².",
        rec.timestamp.to_sentence_form(),
        fmt2(rec.x),
        fmt2(rec.y),
        fmt2(rec.vx),
        fmt2(rec.vy),
        fmt2(rec.vx.hypot(rec.vy)),
        fmt2(rec.ax),
        fmt2(rec.ay),
        fmt2(rec.ax.hypot(rec.ay)),
    )
}

pub fn verbalize_pedestrian(rec: &PedestrianRecord) -> String {
    format!(
        "At timestamp {}, a pedestrian was located at ({}, {}) with a velocity of ({}, {}) m/s and a speed magnitude of {} m/s.",
        rec.timestamp.to_sentence_form(),
        fmt2(rec.x),
        fmt2(rec.y),
        fmt2(rec.vx),
        fmt2(rec.vy),
        fmt2(rec.vx.hypot(rec.vy)),
    )
}

pub fn verbalize_signal(rec: &TrafficSignalRecord, bearing: Bearing) -> String {
    format!("The traffic signal {} is {}.", bearing.name(), rec.state.name())
}

/// Signal sentence when no ego pose is available.
pub fn verbalize_signal_absolute(rec: &TrafficSignalRecord) -> String {
    format!(
        "At timestamp {}, the traffic signal {} at ({}, {}) is {}.",
        rec.timestamp.to_sentence_form(),
        rec.signal_id,
        fmt2(rec.x),
        fmt2(rec.y),
        rec.state.name()
    )
}

pub fn verbalize_weather(rec: &WeatherRecord) -> String {
    let mut s = format!(
        "At timestamp {}, the weather in {}, {}, {} was {} °C with a wind speed of {} m/s from {} degrees, precipitation of {} mm/h and visibility of {} m.",
        rec.timestamp.to_sentence_form(),
        rec.city,
        rec.state,
        rec.country,
        fmt2(rec.temperature),
        fmt2(rec.wind_speed),
        fmt2(rec.wind_direction),
        fmt2(rec.precipitation),
        fmt2(rec.visibility),
    );
    if let Some(sun) = rec.sunlight {
        s.push_str(&format!(" Sunlight was {} W/m².", fmt2(sun)));
    }
    s
}

pub fn verbalize_sign(rec: &TrafficSignRecord) -> String {
    format!("A {} sign is located at ({}, {}).", rec.sign_type.name().replace('_', " "), fmt2(rec.x), fmt2(rec.y))
}

pub fn verbalize_intersection(rec: &IntersectionRecord) -> String {
    format!(
        "Intersection {} in {}, {}, {} is located at ({}, {}).",
        rec.intersection_id,
        rec.city,
        rec.state,
        rec.country,
        fmt2(rec.x),
        fmt2(rec.y)
    )
}

pub fn verbalize_phase(rec: &PhaseRecord) -> String {
    format!(
        "Signal {} shows {} for {} s starting at offset {} s (phase {}).",
        rec.signal_id,
        rec.state.name(),
        fmt2(rec.duration),
        fmt2(rec.start_offset),
        rec.phase_id
    )
}

fn verbalize_harmonized(rec: &HarmonizedRecord) -> String {
    rec.v_text.clone()
}

/// One sentence for any record. Signals use the relative form when an ego
/// pose is given.
pub fn verbalize_record(rec: &EntityRecord, ego: Option<&EgoPose>) -> String {
    match rec {
        EntityRecord::Vehicles(r) => verbalize_vehicle(r),
        EntityRecord::Pedestrians(r) => verbalize_pedestrian(r),
        EntityRecord::Weather(r) => verbalize_weather(r),
        EntityRecord::TrafficSignals(r) => match ego {
            Some(e) => verbalize_signal(r, bearing(e, Point::new(r.x, r.y))),
            None => verbalize_signal_absolute(r),
        },
        EntityRecord::TrafficSigns(r) => verbalize_sign(r),
        EntityRecord::Intersections(r) => verbalize_intersection(r),
        EntityRecord::Phases(r) => verbalize_phase(r),
        EntityRecord::Harmonized(r) => verbalize_harmonized(r),
    }
}

/// Group rank in result-set rendering: vehicles first.
pub fn group_rank(table: Table) -> u8 {
    match table {
        Table::Vehicles => 0,
        Table::Pedestrians => 1,
        Table::TrafficSignals => 2,
        Table::TrafficSigns => 3,
        Table::Intersections => 4,
        Table::Phases => 5,
        Table::Weather => 6,
        Table::Harmonized => 7,
    }
}

/// One sentence per record, newline-joined. Records are grouped by kind
/// (see [`group_rank`]) and keep their incoming order within a group.
pub fn verbalize_result_set<'a, I>(records: I) -> String
where
    I: IntoIterator<Item = &'a EntityRecord>,
{
    render_set(records, None)
}

pub fn verbalize_result_set_for<'a, I>(records: I, ego: &EgoPose) -> String
where
    I: IntoIterator<Item = &'a EntityRecord>,
{
    render_set(records, Some(ego))
}

fn render_set<'a, I>(records: I, ego: Option<&EgoPose>) -> String
where
    I: IntoIterator<Item = &'a EntityRecord>,
{
    let mut recs: Vec<&EntityRecord> = records.into_iter().collect();
    if recs.is_empty() {
        return EMPTY_RESULT.to_string();
    }
    recs.sort_by_key(|r| group_rank(r.table()));
    recs.iter().map(|r| verbalize_record(r, ego)).collect::<Vec<_>>().join("\n")
}
