//! CSV loading for trajectory, weather and signal feeds.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::store::{
    EntityRecord, KnowledgeStore, PedestrianRecord, SignalState, TrafficSignalRecord, VehicleClass, VehicleRecord,
    WeatherRecord,
};
use crate::time::Timestamp;

use super::rows::{clamp_velocity, Anomaly};
use super::units::Unit;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvKind {
    Trajectory,
    Weather,
    Signals,
}

struct Column {
    name: &'static str,
    required: bool,
    unit: Option<Unit>,
}

const fn req(name: &'static str, unit: Option<Unit>) -> Column {
    Column { name, required: true, unit }
}

const fn opt(name: &'static str, unit: Option<Unit>) -> Column {
    Column { name, required: false, unit }
}

const M: Option<Unit> = Some(Unit::Meter);
const MPS: Option<Unit> = Some(Unit::MeterPerSecond);
const MPS2: Option<Unit> = Some(Unit::MeterPerSecond2);

const TRAJECTORY: &[Column] = &[
    req("timestamp", None),
    req("entity_id", None),
    req("entity_type", None),
    req("x", M),
    req("y", M),
    req("vx", MPS),
    req("vy", MPS),
    opt("ax", MPS2),
    opt("ay", MPS2),
];

const WEATHER: &[Column] = &[
    req("timestamp", None),
    req("country", None),
    req("state", None),
    req("city", None),
    req("temperature_c", Some(Unit::Celsius)),
    req("wind_speed_ms", MPS),
    req("wind_dir_deg", Some(Unit::Degree)),
    req("precip_mmh", Some(Unit::MillimeterPerHour)),
    req("visibility_m", M),
    opt("sunlight_wm2", Some(Unit::WattPerMeter2)),
];

const SIGNALS: &[Column] = &[
    req("timestamp", None),
    req("signal_id", None),
    req("state", None),
    opt("day_of_week", None),
    req("x", M),
    req("y", M),
];

impl CsvKind {
    fn columns(self) -> &'static [Column] {
        match self {
            CsvKind::Trajectory => TRAJECTORY,
            CsvKind::Weather => WEATHER,
            CsvKind::Signals => SIGNALS,
        }
    }

    /// The canonical header, in documented order.
    pub fn header(self) -> Vec<&'static str> {
        self.columns().iter().map(|c| c.name).collect()
    }
}

/// Renames external columns to canonical ones and declares source units.
///
/// ```toml
/// [columns]
/// "Time" = "timestamp"
/// "speed_x_kmh" = "vx"
///
/// [units]
/// vx = "km/h"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub units: BTreeMap<String, Unit>,
}

impl ColumnMapping {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        toml::from_str(text).map_err(|e| IngestError::Mapping(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn canonical<'a>(&'a self, header: &'a str) -> &'a str {
        let h = header.trim();
        self.columns.get(h).map(String::as_str).unwrap_or(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    /// Rows written per table by this load.
    #[serde(flatten)]
    pub tables: BTreeMap<String, usize>,
    pub rows_read: usize,
    pub inserted: usize,
    pub replaced: usize,
    pub duplicates: usize,
    pub rejected: usize,
    pub flagged: BTreeMap<String, usize>,
    pub rejected_rows: Vec<RejectedRow>,
}

impl IngestReport {
    /// Fold another report into this one.
    pub fn merge(&mut self, other: IngestReport) {
        for (k, v) in other.tables {
            *self.tables.entry(k).or_default() += v;
        }
        for (k, v) in other.flagged {
            *self.flagged.entry(k).or_default() += v;
        }
        self.rows_read += other.rows_read;
        self.inserted += other.inserted;
        self.replaced += other.replaced;
        self.duplicates += other.duplicates;
        self.rejected += other.rejected;
        self.rejected_rows.extend(other.rejected_rows);
    }
}

fn flag_name(a: Anomaly) -> &'static str {
    match a {
        Anomaly::SpeedAboveMax => "speed_above_max",
        Anomaly::NegativeVisibility => "negative_visibility",
        Anomaly::NegativePrecipitation => "negative_precipitation",
        Anomaly::NegativeWindSpeed => "negative_wind_speed",
    }
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    idx: &'a HashMap<&'static str, usize>,
    units: &'a HashMap<&'static str, Unit>,
}

impl Row<'_> {
    fn raw(&self, name: &str) -> Option<&str> {
        self.idx.get(name).and_then(|&i| self.rec.get(i)).map(str::trim).filter(|s| !s.is_empty())
    }

    fn text(&self, name: &str) -> Result<String, String> {
        self.raw(name).map(str::to_string).ok_or_else(|| format!("missing {name}"))
    }

    fn num_opt(&self, name: &str) -> Result<Option<f64>, String> {
        let Some(s) = self.raw(name) else { return Ok(None) };
        let v: f64 = s.parse().map_err(|_| format!("invalid number in {name}: {s:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite {name}"));
        }
        let v = match self.units.get(name) {
            Some(u) => u.to_standard(v),
            None => v,
        };
        Ok(Some(v))
    }

    fn num(&self, name: &str) -> Result<f64, String> {
        self.num_opt(name)?.ok_or_else(|| format!("missing {name}"))
    }

    fn time(&self) -> Result<Timestamp, String> {
        let s = self.text("timestamp")?;
        Timestamp::parse(&s).map_err(|e| format!("invalid timestamp: {e}"))
    }
}

fn build(kind: CsvKind, row: &Row, store: &KnowledgeStore, flags: &mut Vec<Anomaly>) -> Result<EntityRecord, String> {
    let limits = &store.config().limits;
    Ok(match kind {
        CsvKind::Trajectory => {
            let ty = row.text("entity_type")?;
            let (timestamp, entity_id) = (row.time()?, row.text("entity_id")?);
            let (x, y, vx, vy) = (row.num("x")?, row.num("y")?, row.num("vx")?, row.num("vy")?);
            let (ax, ay) = (row.num_opt("ax")?, row.num_opt("ay")?);
            if ty.eq_ignore_ascii_case("pedestrian") {
                let (cvx, cvy) = clamp_velocity(vx, vy, limits.pedestrian_max_speed);
                if (cvx, cvy) != (vx, vy) {
                    flags.push(Anomaly::SpeedAboveMax);
                }
                EntityRecord::Pedestrians(PedestrianRecord { entity_id, timestamp, x, y, vx: cvx, vy: cvy, ax, ay })
            } else {
                let class = VehicleClass::parse(&ty).ok_or_else(|| format!("unknown entity_type {ty:?}"))?;
                let (cvx, cvy) = clamp_velocity(vx, vy, limits.vehicle_max_speed);
                if (cvx, cvy) != (vx, vy) {
                    flags.push(Anomaly::SpeedAboveMax);
                }
                EntityRecord::Vehicles(VehicleRecord {
                    entity_id,
                    timestamp,
                    x,
                    y,
                    vx: cvx,
                    vy: cvy,
                    ax: ax.unwrap_or(0.0),
                    ay: ay.unwrap_or(0.0),
                    class,
                })
            }
        }
        CsvKind::Weather => {
            let mut nonneg = |v: f64, a: Anomaly| {
                if v < 0.0 {
                    flags.push(a);
                    0.0
                } else {
                    v
                }
            };
            let wind_speed = nonneg(row.num("wind_speed_ms")?, Anomaly::NegativeWindSpeed);
            let precipitation = nonneg(row.num("precip_mmh")?, Anomaly::NegativePrecipitation);
            let visibility = nonneg(row.num("visibility_m")?, Anomaly::NegativeVisibility);
            EntityRecord::Weather(WeatherRecord {
                timestamp: row.time()?,
                country: row.text("country")?,
                state: row.text("state")?,
                city: row.text("city")?,
                temperature: row.num("temperature_c")?,
                wind_speed,
                wind_direction: super::units::wrap_degrees(row.num("wind_dir_deg")?),
                precipitation,
                visibility,
                sunlight: row.num_opt("sunlight_wm2")?,
            })
        }
        CsvKind::Signals => {
            let timestamp = row.time()?;
            let s = row.text("state")?;
            let state = SignalState::parse(&s).ok_or_else(|| format!("unknown signal state {s:?}"))?;
            let day_of_week = match row.raw("day_of_week") {
                Some(d) => d.parse().map_err(|_| format!("invalid day_of_week {d:?}"))?,
                None => timestamp.iso_weekday().ok_or("timestamp out of calendar range")?,
            };
            EntityRecord::TrafficSignals(TrafficSignalRecord {
                signal_id: row.text("signal_id")?,
                timestamp,
                state,
                day_of_week,
                x: row.num("x")?,
                y: row.num("y")?,
            })
        }
    })
}

/// Load a CSV file into `store`. Rows that fail to parse or validate are
/// rejected with their line number; later rows with an already-loaded key
/// are counted as duplicates and skipped.
pub fn ingest_csv(
    path: &Path,
    kind: CsvKind,
    mapping: &ColumnMapping,
    store: &mut KnowledgeStore,
) -> Result<IngestReport, IngestError> {
    let f = std::fs::File::open(path)?;
    ingest_csv_reader(f, kind, mapping, store)
}

pub fn ingest_csv_reader<R: Read>(
    reader: R,
    kind: CsvKind,
    mapping: &ColumnMapping,
    store: &mut KnowledgeStore,
) -> Result<IngestReport, IngestError> {
    let cols = kind.columns();
    let mut units = HashMap::new();
    for (name, unit) in &mapping.units {
        let col = cols
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| IngestError::Mapping(format!("unit declared for unknown column {name}")))?;
        match col.unit {
            Some(std) if unit.standard() == std => {
                units.insert(col.name, *unit);
            }
            _ => return Err(IngestError::Mapping(format!("unit {unit} does not fit column {name}"))),
        }
    }

    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let mut idx: HashMap<&'static str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        let canon = mapping.canonical(h);
        let Some(col) = cols.iter().find(|c| c.name == canon) else {
            return Err(IngestError::SchemaMismatch { line: 1, detail: format!("unexpected column {h:?}") });
        };
        if idx.insert(col.name, i).is_some() {
            return Err(IngestError::SchemaMismatch { line: 1, detail: format!("duplicate column {canon}") });
        }
    }
    if let Some(c) = cols.iter().find(|c| c.required && !idx.contains_key(c.name)) {
        return Err(IngestError::SchemaMismatch { line: 1, detail: format!("missing column {}", c.name) });
    }

    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(csv_error(e)),
                _ => {
                    report.rows_read += 1;
                    report.rejected += 1;
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    report.rejected_rows.push(RejectedRow { line, reason: e.to_string() });
                    continue;
                }
            },
        }
        report.rows_read += 1;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row = Row { rec: &rec, idx: &idx, units: &units };
        let mut flags = Vec::new();
        let outcome = build(kind, &row, store, &mut flags).and_then(|r| {
            let key = (r.table(), r.key());
            if !seen.insert(key) {
                return Ok(None);
            }
            store.insert(r).map(Some).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(Some(o)) => {
                let table = kind_table(kind, &rec, &idx);
                *report.tables.entry(table.to_string()).or_default() += 1;
                if o.replaced {
                    report.replaced += 1;
                } else {
                    report.inserted += 1;
                }
                for f in flags {
                    *report.flagged.entry(flag_name(f).to_string()).or_default() += 1;
                }
            }
            Ok(None) => report.duplicates += 1,
            Err(reason) => {
                report.rejected += 1;
                report.rejected_rows.push(RejectedRow { line, reason });
            }
        }
    }
    Ok(report)
}

fn kind_table(kind: CsvKind, rec: &csv::StringRecord, idx: &HashMap<&'static str, usize>) -> &'static str {
    match kind {
        CsvKind::Weather => "weather",
        CsvKind::Signals => "traffic_signals",
        CsvKind::Trajectory => {
            let ty = idx.get("entity_type").and_then(|&i| rec.get(i)).unwrap_or("");
            if ty.trim().eq_ignore_ascii_case("pedestrian") {
                "pedestrians"
            } else {
                "vehicles"
            }
        }
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            _ => unreachable!(),
        }
    } else {
        let line = e.position().map(|p| p.line()).unwrap_or(1);
        IngestError::SchemaMismatch { line, detail: e.to_string() }
    }
}
