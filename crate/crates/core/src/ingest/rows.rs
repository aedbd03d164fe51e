//! Raw structured rows: unit normalization, dedup and anomaly correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::time::Timestamp;

use super::units::Unit;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Signal,
    Weather,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Quantity { value, unit }
    }
}

/// One reading from a structured feed, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStructuredRow {
    pub source: Source,
    /// Entity the row describes (vehicle id, signal id, city). Rows without
    /// one are keyed by position.
    #[serde(default)]
    pub entity: Option<String>,
    pub timestamp: Timestamp,
    #[serde(default)]
    pub position: Option<Point>,
    pub values: BTreeMap<String, Quantity>,
}

/// Convert every value to its standard unit. Applying it twice is the same
/// as applying it once.
pub fn normalize_structured(row: &RawStructuredRow) -> Result<RawStructuredRow, IngestError> {
    let mut out = row.clone();
    if let Some(p) = row.position {
        if !p.is_finite() {
            return Err(IngestError::NonFiniteValue("position".into()));
        }
    }
    for (name, q) in out.values.iter_mut() {
        if !q.value.is_finite() {
            return Err(IngestError::NonFiniteValue(name.clone()));
        }
        let v = q.unit.to_standard(q.value);
        if !v.is_finite() {
            return Err(IngestError::NonFiniteValue(name.clone()));
        }
        *q = Quantity::new(v, q.unit.standard());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    /// Upper bound on speed, m/s.
    pub v_max: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig { v_max: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anomaly {
    SpeedAboveMax,
    NegativeVisibility,
    NegativePrecipitation,
    NegativeWindSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRow {
    pub row: RawStructuredRow,
    pub flags: Vec<Anomaly>,
}

fn dedup_key(r: &RawStructuredRow) -> (Source, String, Timestamp) {
    let k = match (&r.entity, r.position) {
        (Some(e), _) => format!("e:{e}"),
        (None, Some(p)) => format!("p:{:016x}:{:016x}", p.x.to_bits(), p.y.to_bits()),
        (None, None) => String::new(),
    };
    (r.source, k, r.timestamp)
}

/// Total order over rows used to make the result independent of input order.
fn canonical(a: &RawStructuredRow, b: &RawStructuredRow) -> std::cmp::Ordering {
    let pos = |r: &RawStructuredRow| r.position.map(|p| (p.x.to_bits(), p.y.to_bits()));
    dedup_key(a).cmp(&dedup_key(b)).then_with(|| pos(a).cmp(&pos(b))).then_with(|| {
        let va = a.values.iter().map(|(k, q)| (k, q.value.to_bits(), q.unit));
        let vb = b.values.iter().map(|(k, q)| (k, q.value.to_bits(), q.unit));
        va.cmp(vb)
    })
}

/// Scale `(vx, vy)` so its norm does not exceed `v_max`.
pub fn clamp_velocity(vx: f64, vy: f64, v_max: f64) -> (f64, f64) {
    let s = vx.hypot(vy);
    if s <= v_max {
        return (vx, vy);
    }
    let f = v_max / s;
    let (mut x, mut y) = (vx * f, vy * f);
    while x.hypot(y) > v_max {
        x *= 1.0 - f64::EPSILON;
        y *= 1.0 - f64::EPSILON;
    }
    (x, y)
}

fn correct(mut row: RawStructuredRow, cfg: &CorrectionConfig) -> CorrectedRow {
    let mut flags = Vec::new();
    let v = &mut row.values;
    if let Some(s) = v.get_mut("speed") {
        if s.value > cfg.v_max {
            s.value = cfg.v_max;
            flags.push(Anomaly::SpeedAboveMax);
        }
    }
    if let (Some(vx), Some(vy)) = (v.get("vx").map(|q| q.value), v.get("vy").map(|q| q.value)) {
        let (cx, cy) = clamp_velocity(vx, vy, cfg.v_max);
        if (cx, cy) != (vx, vy) {
            v.get_mut("vx").unwrap().value = cx;
            v.get_mut("vy").unwrap().value = cy;
            if !flags.contains(&Anomaly::SpeedAboveMax) {
                flags.push(Anomaly::SpeedAboveMax);
            }
        }
    }
    for (name, flag) in [
        ("visibility", Anomaly::NegativeVisibility),
        ("precipitation", Anomaly::NegativePrecipitation),
        ("wind_speed", Anomaly::NegativeWindSpeed),
    ] {
        if let Some(q) = v.get_mut(name) {
            if q.value < 0.0 {
                q.value = 0.0;
                flags.push(flag);
            }
        }
    }
    CorrectedRow { row, flags }
}

/// Keep one row per `(source, entity or position, timestamp)` and clamp
/// out-of-bound values. The first row in canonical order wins, so the
/// output depends only on the input multiset.
pub fn dedup_and_correct(rows: Vec<RawStructuredRow>, cfg: &CorrectionConfig) -> Vec<CorrectedRow> {
    let mut rows = rows;
    rows.sort_by(canonical);
    rows.dedup_by(|b, a| dedup_key(a) == dedup_key(b));
    rows.into_iter().map(|r| correct(r, cfg)).collect()
}
