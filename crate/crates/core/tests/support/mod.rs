//! Generators and brute-force reference implementations shared by the
//! integration tests and the acceptance harness. Nothing here calls the
//! index, the query executor or the metric functions under test.

#![allow(dead_code)]

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use envkb::eval::synthetic::SYNTHETIC_EPOCH;
use envkb::ingest::{Modality, ModalityStream};
use envkb::query::{EntityFilter, EntityRef, PointRef, Projection, QueryIr, SpatialFilter, TemporalFilter, TimeRef};
use envkb::store::{
    EntityRecord, HarmonizedRecord, IntersectionRecord, KnowledgeStore, PedestrianRecord, RowKey, SignType,
    SignalState, StoreConfig, StructuredRef, Table, TrafficSignRecord, TrafficSignalRecord, VehicleClass,
    VehicleRecord, WeatherRecord,
};
use envkb::{Point, Timestamp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Frame instants used by generated stores; few enough that instant
/// queries regularly hit rows.
pub fn instants() -> Vec<Timestamp> {
    (0..8).map(|i| SYNTHETIC_EPOCH.plus_millis(i * 500)).collect()
}

pub const IDS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
pub const CITIES: [&str; 3] = ["Berlin", "Hamburg", "Bonn"];

fn coord(r: &mut ChaCha8Rng) -> f64 {
    // Mix a coarse lattice (exact ties on boundaries) with continuous values.
    if r.random_bool(0.3) {
        r.random_range(0..40) as f64 * 5.0
    } else {
        r.random_range(0.0..200.0)
    }
}

/// A store with rows in every table. `n` is the approximate number of
/// moving-entity rows.
pub fn random_store(seed: u64, n: usize) -> KnowledgeStore {
    let mut r = rng(seed);
    let mut s = KnowledgeStore::new(StoreConfig::default());
    let ts = instants();
    for _ in 0..n {
        let t = *ts.choose(&mut r).unwrap();
        let id = IDS.choose(&mut r).unwrap().to_string();
        let (x, y) = (coord(&mut r), coord(&mut r));
        let rec = if r.random_bool(0.7) {
            EntityRecord::Vehicles(VehicleRecord {
                entity_id: id,
                timestamp: t,
                x,
                y,
                vx: r.random_range(-20.0..20.0),
                vy: r.random_range(-20.0..20.0),
                ax: r.random_range(-3.0..3.0),
                ay: r.random_range(-3.0..3.0),
                class: *[VehicleClass::Car, VehicleClass::Truck, VehicleClass::Bus].choose(&mut r).unwrap(),
            })
        } else {
            EntityRecord::Pedestrians(PedestrianRecord {
                entity_id: format!("p{id}"),
                timestamp: t,
                x,
                y,
                vx: r.random_range(-2.0..2.0),
                vy: r.random_range(-2.0..2.0),
                ax: r.random_bool(0.5).then(|| r.random_range(-1.0..1.0)),
                ay: None,
            })
        };
        s.insert(rec).unwrap();
    }
    for (k, t) in ts.iter().enumerate() {
        for j in 0..2 {
            s.insert(EntityRecord::TrafficSignals(TrafficSignalRecord {
                signal_id: format!("s{j}"),
                timestamp: *t,
                state: [SignalState::Red, SignalState::Green, SignalState::Yellow][(k + j) % 3],
                day_of_week: t.iso_weekday().unwrap(),
                x: 50.0 + 100.0 * j as f64,
                y: 100.0,
            }))
            .unwrap();
        }
        for c in CITIES {
            if r.random_bool(0.6) {
                s.insert(EntityRecord::Weather(WeatherRecord {
                    timestamp: *t,
                    country: "DE".into(),
                    state: "X".into(),
                    city: c.into(),
                    temperature: r.random_range(-5.0..30.0),
                    wind_speed: r.random_range(0.0..15.0),
                    wind_direction: r.random_range(0.0..360.0),
                    precipitation: r.random_range(0.0..5.0),
                    visibility: r.random_range(0.0..10000.0),
                    sunlight: None,
                }))
                .unwrap();
            }
        }
    }
    for j in 0..5 {
        s.insert(EntityRecord::TrafficSigns(TrafficSignRecord {
            sign_id: format!("sign{j}"),
            sign_type: [SignType::Stop, SignType::Yield, SignType::Crosswalk][j % 3],
            x: coord(&mut r),
            y: coord(&mut r),
        }))
        .unwrap();
        s.insert(EntityRecord::Intersections(IntersectionRecord {
            intersection_id: format!("i{j}"),
            country: "DE".into(),
            state: "X".into(),
            city: "Berlin".into(),
            x: coord(&mut r),
            y: coord(&mut r),
        }))
        .unwrap();
    }
    let vehicles: Vec<EntityRecord> = s.records(Table::Vehicles).take(10).cloned().collect();
    for v in vehicles {
        let p = v.position().unwrap();
        s.insert_harmonized(HarmonizedRecord {
            tau: v.timestamp().unwrap(),
            lx: p.x,
            ly: p.y,
            v_text: format!("vehicle {}", v.entity_id()),
            structured_ref: StructuredRef { table: Table::Vehicles, key: v.key() },
        })
        .unwrap();
    }
    s
}

/// A bound IR over a random table with random filters.
pub fn random_ir(r: &mut ChaCha8Rng) -> QueryIr {
    let tables = [
        Table::Vehicles,
        Table::Vehicles,
        Table::Pedestrians,
        Table::TrafficSignals,
        Table::TrafficSigns,
        Table::Intersections,
        Table::Weather,
        Table::Harmonized,
    ];
    let table = *tables.choose(r).unwrap();
    let projection = if r.random_bool(0.4) {
        Projection::All
    } else {
        let cols = table.columns();
        let k = r.random_range(1..=cols.len().min(4));
        Projection::Fields(cols.choose_multiple(r, k).map(|c| c.to_string()).collect())
    };
    let spatial = if !table.is_spatial() || r.random_bool(0.2) {
        SpatialFilter::None
    } else if r.random_bool(0.15) {
        let p = if r.random_bool(0.5) { (50.0, 100.0) } else { (coord(r), coord(r)) };
        SpatialFilter::PointEqual(PointRef::At(Point::new(p.0, p.1)))
    } else {
        let radius = if r.random_bool(0.2) { r.random_range(0..10) as f64 * 5.0 } else { r.random_range(0.0..120.0) };
        SpatialFilter::Radius { center: PointRef::At(Point::new(coord(r), coord(r))), radius }
    };
    let ts = instants();
    let temporal = match r.random_range(0..4) {
        0 => TemporalFilter::None,
        1 => TemporalFilter::Instant(TimeRef::At(*ts.choose(r).unwrap())),
        2 => TemporalFilter::Instant(TimeRef::At(SYNTHETIC_EPOCH.plus_millis(r.random_range(0..4000)))),
        _ => {
            let a = r.random_range(-500..4000);
            let b = a + r.random_range(0..2500);
            TemporalFilter::Window { start: SYNTHETIC_EPOCH.plus_millis(a), end: SYNTHETIC_EPOCH.plus_millis(b) }
        }
    };
    let pool: Vec<String> = match table {
        Table::Vehicles => IDS.iter().map(|s| s.to_string()).collect(),
        Table::Pedestrians => IDS.iter().map(|s| format!("p{s}")).collect(),
        Table::TrafficSignals => vec!["s0".into(), "s1".into()],
        Table::Weather => CITIES.iter().map(|s| s.to_string()).collect(),
        Table::TrafficSigns => (0..5).map(|j| format!("sign{j}")).collect(),
        Table::Intersections => (0..5).map(|j| format!("i{j}")).collect(),
        _ => vec!["nothing".into()],
    };
    let entity_filter = match r.random_range(0..4) {
        0 => EntityFilter::Equals(EntityRef::Id(pool.choose(r).unwrap().clone())),
        1 => EntityFilter::Exclude(EntityRef::Id(pool.choose(r).unwrap().clone())),
        _ => EntityFilter::None,
    };
    let limit = r.random_bool(0.3).then(|| r.random_range(1..8));
    QueryIr { table, projection, spatial, temporal, entity_filter, limit }
}

fn oracle_order(a: &EntityRecord, b: &EntityRecord) -> Ordering {
    let at = a.timestamp().map(|t| t.millis());
    let bt = b.timestamp().map(|t| t.millis());
    at.cmp(&bt).then_with(|| a.entity_id().cmp(b.entity_id())).then_with(|| a.key().0.cmp(&b.key().0))
}

/// Reference interpreter: scan every row of the table and apply each
/// filter literally.
pub fn full_scan(ir: &QueryIr, store: &KnowledgeStore) -> Vec<RowKey> {
    let mut rows: Vec<&EntityRecord> = store
        .records(ir.table)
        .filter(|rec| match ir.spatial {
            SpatialFilter::None => true,
            SpatialFilter::Radius { center: PointRef::At(c), radius } => {
                let p = rec.position().unwrap();
                let (dx, dy) = (p.x - c.x, p.y - c.y);
                dx * dx + dy * dy <= radius * radius
            }
            SpatialFilter::PointEqual(PointRef::At(c)) => rec.position().unwrap() == c,
            _ => panic!("unbound IR given to the oracle"),
        })
        .filter(|rec| match (ir.temporal, rec.timestamp()) {
            (_, None) | (TemporalFilter::None, _) => true,
            (TemporalFilter::Instant(TimeRef::At(t)), Some(rt)) => rt == t,
            (TemporalFilter::Window { start, end }, Some(rt)) => start <= rt && rt <= end,
            _ => panic!("unbound IR given to the oracle"),
        })
        .filter(|rec| match &ir.entity_filter {
            EntityFilter::None => true,
            EntityFilter::Equals(EntityRef::Id(id)) => rec.entity_id() == id,
            EntityFilter::Exclude(EntityRef::Id(id)) => rec.entity_id() != id,
            _ => panic!("unbound IR given to the oracle"),
        })
        .collect();
    rows.sort_by(|a, b| oracle_order(a, b));
    if let Some(n) = ir.limit {
        rows.truncate(n as usize);
    }
    rows.into_iter().map(|r| r.key()).collect()
}

pub fn keys(rows: &[&EntityRecord]) -> Vec<RowKey> {
    rows.iter().map(|r| r.key()).collect()
}

/// Mean per-step Euclidean distance, written without any shared helper.
pub fn ade_oracle(pred: &[(f64, f64)], gt: &[(f64, f64)]) -> f64 {
    assert_eq!(pred.len(), gt.len());
    let mut total = 0.0;
    for i in 0..pred.len() {
        let dx = pred[i].0 - gt[i].0;
        let dy = pred[i].1 - gt[i].1;
        total += (dx * dx + dy * dy).sqrt();
    }
    total / pred.len() as f64
}

pub fn fde_oracle(pred: &[(f64, f64)], gt: &[(f64, f64)]) -> f64 {
    let (p, g) = (pred[pred.len() - 1], gt[gt.len() - 1]);
    ((p.0 - g.0) * (p.0 - g.0) + (p.1 - g.1) * (p.1 - g.1)).sqrt()
}

pub fn random_pair(r: &mut ChaCha8Rng, max_len: usize) -> (Vec<Point>, Vec<Point>) {
    let n = r.random_range(1..=max_len);
    let scale = *[1.0, 100.0, 1e5].choose(r).unwrap();
    let mut pt = || Point::new(r.random_range(-scale..scale), r.random_range(-scale..scale));
    let a: Vec<Point> = (0..n).map(|_| pt()).collect();
    let b: Vec<Point> = (0..n).map(|_| pt()).collect();
    (a, b)
}

pub fn tuples(ps: &[Point]) -> Vec<(f64, f64)> {
    ps.iter().map(|p| (p.x, p.y)).collect()
}

/// Statements that try to change data or smuggle a second statement past
/// the validator.
pub const ADVERSARIAL_SQL: [&str; 50] = [
    "DELETE FROM vehicles;",
    "delete from vehicles where 1=1",
    "DROP TABLE vehicles;",
    "drop table if exists weather",
    "UPDATE vehicles SET x = 0;",
    "update traffic_signals set state = 'green' where signal_id = 's0'",
    "INSERT INTO vehicles VALUES ('a', '2023-09-24T00:00:00Z', 0, 0, 0, 0, 0, 0, 'car');",
    "insert into weather (city) values ('x')",
    "REPLACE INTO vehicles VALUES (1);",
    "MERGE INTO vehicles USING pedestrians ON 1=1 WHEN MATCHED THEN DELETE;",
    "TRUNCATE TABLE vehicles;",
    "ALTER TABLE vehicles ADD COLUMN z REAL;",
    "CREATE TABLE t (a INT);",
    "CREATE INDEX i ON vehicles (x);",
    "GRANT ALL ON vehicles TO public;",
    "REVOKE SELECT ON vehicles FROM public;",
    "ATTACH DATABASE 'x.db' AS x;",
    "DETACH DATABASE x;",
    "PRAGMA writable_schema = 1;",
    "VACUUM;",
    "SELECT * FROM vehicles; DELETE FROM vehicles;",
    "SELECT * FROM vehicles; DROP TABLE vehicles",
    "SELECT x FROM vehicles;; UPDATE vehicles SET x = 1",
    "SELECT * FROM vehicles WHERE entity_id = 'a'; INSERT INTO vehicles VALUES (1)",
    "SELECT * FROM vehicles -- ; DROP TABLE vehicles",
    "SELECT * FROM vehicles /* */ ; DELETE FROM vehicles",
    "SELECT * FROM vehicles WHERE x = 1 /* DROP TABLE vehicles */",
    "SELECT * FROM vehicles # DROP TABLE vehicles",
    "/* hidden */ DELETE FROM vehicles",
    "-- comment\nDELETE FROM vehicles",
    "SELECT * INTO backup FROM vehicles;",
    "SELECT * FROM vehicles WHERE entity_id = '' OR 1=1; DELETE FROM vehicles;",
    "WITH d AS (DELETE FROM vehicles RETURNING *) SELECT * FROM d;",
    "EXPLAIN DELETE FROM vehicles;",
    "BEGIN; DELETE FROM vehicles; COMMIT;",
    "COMMIT;",
    "ROLLBACK;",
    "SAVEPOINT s1;",
    "SET search_path = evil;",
    "CALL purge_vehicles();",
    "EXEC sp_droptable 'vehicles';",
    "EXECUTE purge;",
    "LOAD DATA INFILE 'x' INTO TABLE vehicles;",
    "COPY vehicles FROM '/tmp/x';",
    "UPSERT INTO vehicles VALUES (1);",
    "DeLeTe FrOm vehicles",
    "  \n\tDROP\tTABLE vehicles  ",
    "SELECT * FROM vehicles WHERE x = (DELETE FROM vehicles)",
    "SELECT * FROM vehicles UNION ALL SELECT * FROM vehicles; DROP TABLE weather",
    "RENAME TABLE vehicles TO gone;",
];

/// Sentences of the query grammar used as fuzzing seeds.
pub const SEED_SENTENCES: [&str; 6] = [
    "Retrieve the traffic signal status for the current road segment.",
    "At timestamp 2023-09-24 00:01:17, provide the location, velocity, and acceleration of my car located at (604739.287, 5792784.4887500005). In addition, provide the same information for other vehicles around my car.",
    "Between 2023-09-24 00:00:00 and 2023-09-24 00:10:00, list the position and velocity of vehicle 'veh_7' within 50 m of (10, -20), limit 5.",
    "At timestamp 2023-09-24 00:00:00, get the weather temperature and wind speed.",
    "Show the location of other pedestrians around my car within 15 meters.",
    "List the id and location of other vehicles within 100 meters of my car.",
];

/// Random bytes, sometimes spliced into a valid sentence so the parser is
/// pushed past its first token.
pub fn fuzz_input(r: &mut ChaCha8Rng) -> Vec<u8> {
    let len = r.random_range(0..80);
    let noise: Vec<u8> =
        (0..len).map(|_| if r.random_bool(0.5) { r.random_range(0x20..0x7f) } else { r.random::<u8>() }).collect();
    if r.random_bool(0.5) {
        return noise;
    }
    let seed = SEED_SENTENCES.choose(r).unwrap().as_bytes();
    let cut = r.random_range(0..=seed.len());
    let resume = r.random_range(cut..=seed.len());
    let mut out = seed[..cut].to_vec();
    out.extend(noise);
    out.extend_from_slice(&seed[resume..]);
    out
}

/// Distinct vehicle sentences in a prompt.
pub fn vehicle_sentences(text: &str) -> std::collections::BTreeSet<String> {
    text.lines().filter(|l| l.contains(", a vehicle was located at (")).map(str::to_string).collect()
}

/// Independent fusion-stage implementations.
pub fn med3(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|i| {
            let mut w = [a[if i == 0 { 0 } else { i - 1 }], a[i], a[if i + 1 == n { n - 1 } else { i + 1 }]];
            w.sort_by(|x, y| x.partial_cmp(y).unwrap());
            w[1]
        })
        .collect()
}

pub fn scale01(a: &[f64]) -> Vec<f64> {
    let lo = a.iter().cloned().fold(f64::MAX, f64::min);
    let hi = a.iter().cloned().fold(f64::MIN, f64::max);
    a.iter().map(|v| if hi == lo { 0.5 } else { (v - lo) / (hi - lo) }).collect()
}

pub fn interp_to(a: &[f64], len: usize) -> Vec<f64> {
    if a.len() == 1 || len == 1 {
        return vec![a[0]; len];
    }
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        let pos = (j * (a.len() - 1)) as f64 / (len - 1) as f64;
        let lo = (pos as usize).min(a.len() - 2);
        let frac = pos - lo as f64;
        out.push(a[lo] * (1.0 - frac) + a[lo + 1] * frac);
    }
    out
}

pub fn stream(m: Modality, samples: &[(i64, Vec<f64>)]) -> ModalityStream {
    ModalityStream {
        modality: m,
        samples: samples.iter().map(|(t, a)| (Timestamp::from_millis(*t), a.clone())).collect(),
    }
}
