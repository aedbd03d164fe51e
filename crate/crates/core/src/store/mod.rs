//! In-memory knowledge base of environmental records.
//!
//! Each table keeps its rows in a slot vector with a key map, a grid index
//! over position and time, and a per-entity track map. Radius and window
//! queries return rows in `(timestamp, entity_id)` order with inclusive
//! bounds on both distance and time.
//!
//! [`SharedStore`] provides the single-writer / many-reader discipline:
//! readers take an immutable [`StoreSnapshot`] that later writes never
//! disturb.

mod index;
mod records;
mod snapshot;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::geom::{within_radius, Point};
use crate::time::Timestamp;

pub use index::{CellKey, GridIndex, IndexEntry, Slot};
pub use records::*;
pub use snapshot::{read_snapshot, write_snapshot};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invariant violated on {table}.{field}")]
    InvariantViolation { table: Table, field: &'static str },
    #[error("timestamp {0} outside the dataset epoch bounds")]
    EpochOutOfBounds(Timestamp),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("reference to missing row {table}/{key}")]
    DanglingReference { table: Table, key: RowKey },
    #[error("table {0} has no position columns")]
    NotSpatial(Table),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StoreError {
    /// The offending field for invariant errors, for API responses.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            StoreError::InvariantViolation { field, .. } => Some(field),
            StoreError::EpochOutOfBounds(_) => Some("timestamp"),
            StoreError::DanglingReference { .. } => Some("structured_ref"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub limits: Limits,
    /// Grid cell edge in meters.
    pub cell_size: f64,
    /// Time bucket width in seconds.
    pub bucket_secs: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { limits: Limits::default(), cell_size: 50.0, bucket_secs: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InsertOutcome {
    pub key: RowKey,
    pub replaced: bool,
}

#[derive(Debug, Clone)]
struct TableData {
    slots: Vec<Option<EntityRecord>>,
    free: Vec<Slot>,
    by_key: HashMap<RowKey, Slot>,
    by_entity: HashMap<String, BTreeMap<Option<Timestamp>, Slot>>,
    index: GridIndex,
    len: usize,
}

impl TableData {
    fn new(config: &StoreConfig) -> Self {
        TableData {
            slots: Vec::new(),
            free: Vec::new(),
            by_key: HashMap::new(),
            by_entity: HashMap::new(),
            index: GridIndex::new(config.cell_size, config.bucket_secs),
            len: 0,
        }
    }

    fn get(&self, slot: Slot) -> &EntityRecord {
        self.slots[slot as usize].as_ref().expect("index points at a live slot")
    }

    fn attach(&mut self, slot: Slot, rec: &EntityRecord) {
        if let Some(p) = rec.position() {
            self.index.insert(p, rec.timestamp(), slot);
        }
        self.by_entity.entry(rec.entity_id().to_string()).or_default().insert(rec.timestamp(), slot);
    }

    fn detach(&mut self, slot: Slot, rec: &EntityRecord) {
        if let Some(p) = rec.position() {
            self.index.remove(p, rec.timestamp(), slot);
        }
        if let Some(track) = self.by_entity.get_mut(rec.entity_id()) {
            if track.get(&rec.timestamp()) == Some(&slot) {
                track.remove(&rec.timestamp());
            }
            if track.is_empty() {
                self.by_entity.remove(rec.entity_id());
            }
        }
    }

    fn upsert(&mut self, key: RowKey, rec: EntityRecord) -> bool {
        if let Some(&slot) = self.by_key.get(&key) {
            let old = self.slots[slot as usize].take().expect("live slot");
            self.detach(slot, &old);
            self.attach(slot, &rec);
            self.slots[slot as usize] = Some(rec);
            return true;
        }
        let slot = match self.free.pop() {
            Some(s) => s,
            None => {
                self.slots.push(None);
                (self.slots.len() - 1) as Slot
            }
        };
        self.attach(slot, &rec);
        self.slots[slot as usize] = Some(rec);
        self.by_key.insert(key, slot);
        self.len += 1;
        false
    }

    fn remove(&mut self, key: &RowKey) -> Option<EntityRecord> {
        let slot = self.by_key.remove(key)?;
        let rec = self.slots[slot as usize].take()?;
        self.detach(slot, &rec);
        self.free.push(slot);
        self.len -= 1;
        Some(rec)
    }

    fn iter(&self) -> impl Iterator<Item = &EntityRecord> {
        self.slots.iter().filter_map(Option::as_ref)
    }
}

fn time_ok(rec: &EntityRecord, t0: Timestamp, t1: Timestamp) -> bool {
    match rec.timestamp() {
        Some(t) => t0 <= t && t <= t1,
        // Static rows (signs, intersections, phases) hold at every instant.
        None => true,
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    config: StoreConfig,
    tables: Vec<TableData>,
}

impl Default for KnowledgeStore {
    fn default() -> Self {
        KnowledgeStore::new(StoreConfig::default())
    }
}

impl KnowledgeStore {
    pub fn new(config: StoreConfig) -> Self {
        let tables = Table::ALL.iter().map(|_| TableData::new(&config)).collect();
        KnowledgeStore { config, tables }
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn data(&self, table: Table) -> &TableData {
        &self.tables[table as usize]
    }

    fn data_mut(&mut self, table: Table) -> &mut TableData {
        &mut self.tables[table as usize]
    }

    /// Validate and upsert a row. A row with the same key replaces the
    /// previous version and the outcome reports `replaced`.
    pub fn insert(&mut self, record: EntityRecord) -> Result<InsertOutcome, StoreError> {
        record.validate(&self.config.limits)?;
        match &record {
            EntityRecord::Phases(p) => {
                if !self.data(Table::TrafficSignals).by_entity.contains_key(&p.signal_id) {
                    return Err(StoreError::InvariantViolation { table: Table::Phases, field: "signal_id" });
                }
            }
            EntityRecord::Harmonized(h) => {
                let r = &h.structured_ref;
                if self.query_by_key(r.table, &r.key).is_none() {
                    return Err(StoreError::DanglingReference { table: r.table, key: r.key.clone() });
                }
            }
            _ => {}
        }
        let key = record.key();
        let table = record.table();
        let replaced = self.data_mut(table).upsert(key.clone(), record);
        Ok(InsertOutcome { key, replaced })
    }

    pub fn insert_harmonized(&mut self, h: HarmonizedRecord) -> Result<InsertOutcome, StoreError> {
        self.insert(EntityRecord::Harmonized(h))
    }

    /// Remove a row. Harmonized rows that referenced it are removed too.
    pub fn delete(&mut self, table: Table, key: &RowKey) -> Option<EntityRecord> {
        let removed = self.data_mut(table).remove(key)?;
        if table != Table::Harmonized {
            let orphans: Vec<RowKey> = self
                .data(Table::Harmonized)
                .iter()
                .filter(|r| match r {
                    EntityRecord::Harmonized(h) => h.structured_ref.table == table && &h.structured_ref.key == key,
                    _ => false,
                })
                .map(EntityRecord::key)
                .collect();
            for k in orphans {
                self.data_mut(Table::Harmonized).remove(&k);
            }
        }
        Some(removed)
    }

    pub fn query_by_key(&self, table: Table, key: &RowKey) -> Option<&EntityRecord> {
        let data = self.data(table);
        data.by_key.get(key).map(|&slot| data.get(slot))
    }

    /// Rows within `radius` of `center` (inclusive) with timestamps in
    /// `[t0, t1]` (inclusive), ordered by `(timestamp, entity_id)`.
    pub fn query_radius(
        &self,
        table: Table,
        center: Point,
        radius: f64,
        t0: Timestamp,
        t1: Timestamp,
    ) -> Result<Vec<&EntityRecord>, StoreError> {
        if !table.is_spatial() {
            return Err(StoreError::NotSpatial(table));
        }
        if radius.is_nan() || radius < 0.0 || !center.is_finite() {
            return Err(StoreError::InvalidQuery(format!(
                "radius must be non-negative and center finite (r={radius})"
            )));
        }
        if t0 > t1 {
            return Err(StoreError::InvalidQuery(format!("window start {t0} after end {t1}")));
        }
        let data = self.data(table);
        let mut out: Vec<&EntityRecord> = data
            .index
            .candidates(center, radius, t0, t1)
            .into_iter()
            .map(|slot| data.get(slot))
            .filter(|rec| time_ok(rec, t0, t1) && rec.position().is_some_and(|p| within_radius(p, center, radius)))
            .collect();
        out.sort_by(|a, b| result_order(a, b));
        Ok(out)
    }

    /// Every row of `table` whose timestamp lies in `[t0, t1]`, in result order.
    pub fn query_window(&self, table: Table, t0: Timestamp, t1: Timestamp) -> Vec<&EntityRecord> {
        let mut out: Vec<&EntityRecord> = self.data(table).iter().filter(|r| time_ok(r, t0, t1)).collect();
        out.sort_by(|a, b| result_order(a, b));
        out
    }

    /// All rows for one entity, ordered by time.
    pub fn track(&self, table: Table, entity_id: &str) -> Vec<&EntityRecord> {
        let data = self.data(table);
        data.by_entity.get(entity_id).map(|t| t.values().map(|&s| data.get(s)).collect()).unwrap_or_default()
    }

    /// Entity ids present in `table`, sorted.
    pub fn entities(&self, table: Table) -> Vec<&str> {
        let mut ids: Vec<&str> = self.data(table).by_entity.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    /// Rows of one table in slot order (unsorted).
    pub fn records(&self, table: Table) -> impl Iterator<Item = &EntityRecord> {
        self.data(table).iter()
    }

    pub fn len_of(&self, table: Table) -> usize {
        self.data(table).len
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(|t| t.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> BTreeMap<Table, usize> {
        Table::ALL.iter().map(|&t| (t, self.len_of(t))).collect()
    }

    pub fn index_entries(&self, table: Table) -> Vec<IndexEntry> {
        self.data(table).index.entries()
    }

    /// Slot number of a key, for matching against [`index_entries`](Self::index_entries).
    pub fn slot_of(&self, table: Table, key: &RowKey) -> Option<Slot> {
        self.data(table).by_key.get(key).copied()
    }
}

/// Read-only handle; cheap to clone and unaffected by later writes.
pub type StoreSnapshot = Arc<KnowledgeStore>;

/// Store shared between one writer and many readers.
#[derive(Debug, Default)]
pub struct SharedStore {
    inner: RwLock<Arc<KnowledgeStore>>,
}

impl SharedStore {
    pub fn new(store: KnowledgeStore) -> Self {
        SharedStore { inner: RwLock::new(Arc::new(store)) }
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        Arc::clone(&self.inner.read())
    }

    /// Run a mutation under the exclusive write lock. Outstanding snapshots
    /// keep their copy (copy-on-write).
    pub fn write<R>(&self, f: impl FnOnce(&mut KnowledgeStore) -> R) -> R {
        let mut guard = self.inner.write();
        f(Arc::make_mut(&mut guard))
    }

    pub fn insert(&self, record: EntityRecord) -> Result<InsertOutcome, StoreError> {
        self.write(|s| s.insert(record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn veh(id: &str, t: &str, x: f64, y: f64) -> EntityRecord {
        EntityRecord::Vehicles(VehicleRecord {
            entity_id: id.into(),
            timestamp: ts(t),
            x,
            y,
            vx: 0.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            class: VehicleClass::Car,
        })
    }

    fn sample_vehicle() -> EntityRecord {
        EntityRecord::Vehicles(VehicleRecord {
            entity_id: "veh_17".into(),
            timestamp: ts("2023-09-24T00:01:17"),
            x: 604750.30,
            y: 5792780.20,
            vx: -3.00,
            vy: 1.00,
            ax: -0.50,
            ay: 0.20,
            class: VehicleClass::Car,
        })
    }

    #[test]
    fn insert_then_retrieve() {
        let mut s = KnowledgeStore::default();
        let rec = sample_vehicle();
        let out = s.insert(rec.clone()).unwrap();
        assert!(!out.replaced);
        assert_eq!(s.query_by_key(Table::Vehicles, &out.key), Some(&rec));
        let t = ts("2023-09-24T00:01:17");
        let hits = s.query_radius(Table::Vehicles, Point::new(604739.287, 5792784.48875), 30.0, t, t).unwrap();
        assert_eq!(hits, vec![&rec]);
    }

    #[test]
    fn duplicate_insert_replaces() {
        let mut s = KnowledgeStore::default();
        s.insert(sample_vehicle()).unwrap();
        let again = s.insert(sample_vehicle()).unwrap();
        assert!(again.replaced);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn replaced_row_returns_latest_version() {
        let mut s = KnowledgeStore::default();
        let k = s.insert(veh("a", "2023-01-01T00:00:00", 1.0, 1.0)).unwrap().key;
        s.insert(veh("a", "2023-01-01T00:00:00", 200.0, 1.0)).unwrap();
        match s.query_by_key(Table::Vehicles, &k).unwrap() {
            EntityRecord::Vehicles(v) => assert_eq!(v.x, 200.0),
            _ => unreachable!(),
        }
        // The index follows the move.
        let t = ts("2023-01-01T00:00:00");
        assert!(s.query_radius(Table::Vehicles, Point::new(1.0, 1.0), 5.0, t, t).unwrap().is_empty());
        assert_eq!(s.query_radius(Table::Vehicles, Point::new(200.0, 1.0), 0.0, t, t).unwrap().len(), 1);
    }

    #[test]
    fn nan_is_rejected() {
        let mut s = KnowledgeStore::default();
        let mut v = sample_vehicle();
        if let EntityRecord::Vehicles(r) = &mut v {
            r.vx = f64::NAN;
        }
        let err = s.insert(v).unwrap_err();
        assert_eq!(err.field(), Some("vx"));
        assert!(s.is_empty());
    }

    #[test]
    fn epoch_bounds() {
        let mut s = KnowledgeStore::default();
        let err = s.insert(veh("a", "2150-01-01T00:00:00", 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, StoreError::EpochOutOfBounds(_)));
    }

    #[test]
    fn radius_boundary_is_inclusive() {
        let mut s = KnowledgeStore::default();
        let t = "2023-01-01T00:00:00";
        s.insert(veh("in", t, 29.9, 0.0)).unwrap();
        s.insert(veh("out", t, 30.1, 0.0)).unwrap();
        s.insert(veh("edge", t, 30.0, 0.0)).unwrap();
        let t = ts(t);
        let ids: Vec<&str> = s
            .query_radius(Table::Vehicles, Point::new(0.0, 0.0), 30.0, t, t)
            .unwrap()
            .iter()
            .map(|r| r.entity_id())
            .collect();
        assert_eq!(ids, vec!["edge", "in"]);
    }

    #[test]
    fn time_window_is_inclusive_and_ordered() {
        let mut s = KnowledgeStore::default();
        s.insert(veh("b", "2023-01-01T00:00:01", 0.0, 0.0)).unwrap();
        s.insert(veh("a", "2023-01-01T00:00:01", 1.0, 0.0)).unwrap();
        s.insert(veh("a", "2023-01-01T00:00:00", 1.0, 0.0)).unwrap();
        s.insert(veh("a", "2023-01-01T00:00:02", 1.0, 0.0)).unwrap();
        let got: Vec<String> = s
            .query_radius(
                Table::Vehicles,
                Point::new(0.0, 0.0),
                10.0,
                ts("2023-01-01T00:00:00"),
                ts("2023-01-01T00:00:01"),
            )
            .unwrap()
            .iter()
            .map(|r| r.key().0)
            .collect();
        assert_eq!(got, vec!["a@2023-01-01T00:00:00.000Z", "a@2023-01-01T00:00:01.000Z", "b@2023-01-01T00:00:01.000Z"]);
    }

    #[test]
    fn unknown_key_is_absent() {
        let s = KnowledgeStore::default();
        assert!(s.query_by_key(Table::Vehicles, &RowKey::from("nope")).is_none());
    }

    #[test]
    fn harmonized_requires_live_reference() {
        let mut s = KnowledgeStore::default();
        let key = s.insert(sample_vehicle()).unwrap().key;
        let h = HarmonizedRecord {
            tau: ts("2023-09-24T00:01:17"),
            lx: 604750.30,
            ly: 5792780.20,
            v_text: "a vehicle".into(),
            structured_ref: StructuredRef { table: Table::Vehicles, key: key.clone() },
        };
        s.insert_harmonized(h.clone()).unwrap();
        let t = h.tau;
        let hits = s.query_radius(Table::Harmonized, Point::new(h.lx, h.ly), 0.0, t, t).unwrap();
        assert_eq!(hits.len(), 1);

        s.delete(Table::Vehicles, &key).unwrap();
        assert_eq!(s.len_of(Table::Harmonized), 0);
        let err = s.insert_harmonized(h).unwrap_err();
        assert!(matches!(err, StoreError::DanglingReference { .. }));
    }

    #[test]
    fn phase_needs_signal() {
        let mut s = KnowledgeStore::default();
        let phase = EntityRecord::Phases(PhaseRecord {
            phase_id: "p1".into(),
            signal_id: "s1".into(),
            start_offset: 0.0,
            duration: 30.0,
            state: SignalState::Green,
        });
        assert!(s.insert(phase.clone()).is_err());
        s.insert(EntityRecord::TrafficSignals(TrafficSignalRecord {
            signal_id: "s1".into(),
            timestamp: ts("2023-09-24T00:00:00"),
            state: SignalState::Red,
            day_of_week: 7,
            x: 0.0,
            y: 0.0,
        }))
        .unwrap();
        assert!(s.insert(phase).is_ok());
    }

    #[test]
    fn non_spatial_table_rejects_radius() {
        let s = KnowledgeStore::default();
        let err =
            s.query_radius(Table::Weather, Point::new(0.0, 0.0), 1.0, Timestamp::MIN, Timestamp::MAX).unwrap_err();
        assert!(matches!(err, StoreError::NotSpatial(Table::Weather)));
    }

    #[test]
    fn snapshots_are_isolated_from_writes() {
        let shared = SharedStore::default();
        shared.insert(veh("a", "2023-01-01T00:00:00", 0.0, 0.0)).unwrap();
        let snap = shared.snapshot();
        shared.insert(veh("b", "2023-01-01T00:00:00", 0.0, 0.0)).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(shared.snapshot().len(), 2);
    }

    #[test]
    fn track_is_time_ordered() {
        let mut s = KnowledgeStore::default();
        s.insert(veh("a", "2023-01-01T00:00:02", 2.0, 0.0)).unwrap();
        s.insert(veh("a", "2023-01-01T00:00:00", 0.0, 0.0)).unwrap();
        s.insert(veh("a", "2023-01-01T00:00:01", 1.0, 0.0)).unwrap();
        let xs: Vec<f64> = s.track(Table::Vehicles, "a").iter().map(|r| r.position().unwrap().x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
    }
}
