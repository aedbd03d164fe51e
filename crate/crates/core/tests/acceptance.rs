//! Acceptance harness: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Run with `cargo test -p envkb-core --test acceptance`.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;

use envkb::eval::metrics::{ade, fde};
use envkb::eval::{
    constant_velocity_store, render_report, ring_scene, run_experiment, ExperimentConfig, ReportFormat, SyntheticConfig,
};
use envkb::ingest::{
    normalize_structured, run_fusion_pipeline, Modality, PipelineStage, Quantity, RawStructuredRow, Source, Unit,
};
use envkb::query::{
    execute, execute_sql, normalize_whitespace, parse_query, parse_query_bytes, project, render_sql, render_sql_with,
    validate_sql, ParserConfig, Profile, QueryContext, QueryError, SqlText,
};
use envkb::rag::{run_proactive_cycle, ConstantVelocityStub, CycleConfig, Mode};
use envkb::store::{
    EntityRecord, KnowledgeStore, SignalState, StoreConfig, Table, TrafficSignalRecord, VehicleClass, VehicleRecord,
};
use envkb::verbalize::{verbalize_record, EgoPose};
use envkb::{Point, Timestamp};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

/// AC1: absolute tolerance between the metric functions and the reference loop.
const METRIC_TOL: f64 = 1e-12;
const METRIC_BUDGET: Duration = Duration::from_secs(5);
/// AC5: zero-error tolerance and time budget for the closed loop.
const CLOSED_LOOP_TOL: f64 = 1e-9;
const CLOSED_LOOP_BUDGET: Duration = Duration::from_secs(60);
const MIN_SCENARIOS: usize = 500;
/// AC7: composition tolerance.
const FUSION_TOL: f64 = 1e-12;
/// AC10: required speed-up of the index over a linear scan.
const MIN_SPEEDUP: f64 = 10.0;

fn ac1_metrics() -> Outcome {
    let mut r = support::rng(1);
    let pairs: Vec<_> = (0..10_000).map(|_| support::random_pair(&mut r, 30)).collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (a, b) in &pairs {
        let (ta, tb) = (support::tuples(a), support::tuples(b));
        let da = (ade(a, b).map_err(|e| e.to_string())? - support::ade_oracle(&ta, &tb)).abs();
        let df = (fde(a, b).map_err(|e| e.to_string())? - support::fde_oracle(&ta, &tb)).abs();
        worst = worst.max(da).max(df);
    }
    let took = start.elapsed();
    let msg = format!("10000 pairs, max |diff| = {worst:e}, {took:.2?}");
    if worst <= METRIC_TOL && took < METRIC_BUDGET {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac2_query_soundness() -> Outcome {
    let mut checked = 0;
    for seed in 0..50u64 {
        let store = support::random_store(seed, 150);
        let mut r = support::rng(seed ^ 0xabcd);
        for _ in 0..20 {
            let ir = support::random_ir(&mut r);
            let direct = execute(&ir, &store).map_err(|e| format!("{ir:?}: {e}"))?;
            if support::keys(&direct) != support::full_scan(&ir, &store) {
                return Err(format!("execute differs from the full scan for {ir:?}"));
            }
            let sql = render_sql(&ir);
            let via_sql = execute_sql(&sql, &store, &QueryContext::default()).map_err(|e| format!("{sql}: {e}"))?;
            if support::keys(&via_sql.records) != support::keys(&direct)
                || project(&via_sql.records, &via_sql.columns) != project(&direct, &ir.columns())
            {
                return Err(format!("rendered SQL differs from execute: {sql}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} random IRs, 0 mismatches"))
}

fn ac3_verbalization() -> Outcome {
    let t = Timestamp::parse("2023-09-24 00:01:17").map_err(|e| e.to_string())?;
    let vehicle = EntityRecord::Vehicles(VehicleRecord {
        entity_id: "veh".into(),
        timestamp: t,
        x: 604750.30,
        y: 5792780.20,
        vx: -3.00,
        vy: 1.00,
        ax: -0.50,
        ay: 0.20,
        class: VehicleClass::Car,
    });
    let expected = "At timestamp 2023-09-24 00:01:17, a vehicle was located at (604750.30, 5792780.20) with a velocity of (-3.00, 1.00) m/s and a speed magnitude of 3.16 m/s. The vehicle experienced an acceleration of (-0.50, 0.20) m/s² with a magnitude of 0.54 m/s².";
    let got = verbalize_record(&vehicle, None);
    if got != expected {
        return Err(format!("vehicle sentence: {got}"));
    }
    let signal = EntityRecord::TrafficSignals(TrafficSignalRecord {
        signal_id: "sig".into(),
        timestamp: t,
        state: SignalState::Red,
        day_of_week: t.iso_weekday().unwrap(),
        x: 604740.0,
        y: 5792783.6,
    });
    let ego = EgoPose::from_velocity(Point::new(604750.30, 5792780.20), -3.0, 1.0);
    let got = verbalize_record(&signal, Some(&ego));
    if got != "The traffic signal ahead is red." {
        return Err(format!("signal sentence: {got}"));
    }
    Ok("vehicle and signal sentences are byte-exact".into())
}

fn ac4_compat_sql() -> Outcome {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/fixtures/compat_signal.sql");
    let reference = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let ir =
        parse_query("Retrieve the traffic signal status for the current road segment.").map_err(|e| e.to_string())?;
    let got = render_sql_with(&ir, Profile::Compat);
    if got.as_str() == normalize_whitespace(&reference) {
        Ok(got.to_string())
    } else {
        Err(format!("rendered {got}"))
    }
}

fn ac5_closed_loop() -> Outcome {
    let start = Instant::now();
    let store = constant_velocity_store(&SyntheticConfig::default());
    let report = run_experiment(&store, &ConstantVelocityStub::default(), &ExperimentConfig::default())
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut worst = 0.0f64;
    for arm in &report.arms {
        if arm.successes != report.scenario_count {
            return Err(format!(
                "{:?}: {} of {} cycles failed",
                arm.arm,
                report.scenario_count - arm.successes,
                report.scenario_count
            ));
        }
        for h in [3, 5, 10] {
            let m = arm.metrics.iter().find(|m| m.horizon == h).ok_or(format!("horizon {h} missing"))?;
            worst = worst.max(m.ade.unwrap_or(f64::INFINITY).abs()).max(m.fde.unwrap_or(f64::INFINITY).abs());
        }
    }
    let msg =
        format!("{} scenarios x {} arms, max error {worst:e}, {took:.2?}", report.scenario_count, report.arms.len());
    if report.arms.len() == 2
        && worst <= CLOSED_LOOP_TOL
        && took < CLOSED_LOOP_BUDGET
        && report.scenario_count >= MIN_SCENARIOS
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac6_retrieval_difference() -> Outcome {
    let mut seen = Vec::new();
    for k in [0usize, 1, 5] {
        let (store, t) = ring_scene(3, k, 5, 100 + k as u64);
        let cfg = CycleConfig::default();
        let stub = ConstantVelocityStub::default();
        let base = run_proactive_cycle(&store, "ego", t, 3, &stub, Mode::Baseline, &cfg).map_err(|e| e.to_string())?;
        let rag = run_proactive_cycle(&store, "ego", t, 3, &stub, Mode::Senserag, &cfg).map_err(|e| e.to_string())?;
        let b = support::vehicle_sentences(&base.bundle.user_message()).len();
        let s = support::vehicle_sentences(&rag.bundle.user_message()).len();
        seen.push(format!("k={k}: +{}", s as i64 - b as i64));
        if s != b + k {
            return Err(seen.join(", "));
        }
    }
    Ok(seen.join(", "))
}

fn random_raw_row(r: &mut rand_chacha::ChaCha8Rng) -> RawStructuredRow {
    let units: Vec<Unit> = Unit::all().collect();
    let names = ["vx", "vy", "speed", "temperature", "visibility", "heading", "wind_speed", "precipitation"];
    let values = (0..r.random_range(0..6))
        .map(|_| {
            let name = names[r.random_range(0..names.len())].to_string();
            (name, Quantity::new(r.random_range(-1e5..1e5), units[r.random_range(0..units.len())]))
        })
        .collect();
    RawStructuredRow {
        source: [Source::Signal, Source::Weather, Source::Trajectory][r.random_range(0..3)],
        entity: r.random_bool(0.7).then(|| format!("e{}", r.random_range(0..5))),
        timestamp: Timestamp::from_millis(r.random_range(0..10_000)),
        position: r.random_bool(0.5).then(|| Point::new(r.random_range(-1e4..1e4), r.random_range(-1e4..1e4))),
        values,
    }
}

fn ac7_normalization_and_fusion() -> Outcome {
    let mut r = support::rng(7);
    for i in 0..1000 {
        let row = random_raw_row(&mut r);
        let once = normalize_structured(&row).map_err(|e| format!("row {i}: {e}"))?;
        let twice = normalize_structured(&once).map_err(|e| format!("row {i}: {e}"))?;
        if once != twice {
            return Err(format!("row {i} is not a fixed point: {once:?} vs {twice:?}"));
        }
    }
    let length = 24;
    let stages = vec![
        PipelineStage::Denoise { modality: Modality::Image, window: 3 },
        PipelineStage::Denoise { modality: Modality::Lidar, window: 3 },
        PipelineStage::Standardize { modality: Modality::Image },
        PipelineStage::Standardize { modality: Modality::Lidar },
        PipelineStage::Align,
        PipelineStage::Format { length },
    ];
    let mut worst = 0.0f64;
    let mut vectors = 0;
    for _ in 0..200 {
        let frames: Vec<i64> = (0..5).map(|i| i * 100).collect();
        let gen = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<(i64, Vec<f64>)> {
            frames
                .iter()
                .map(|t| (*t, (0..r.random_range(1..16)).map(|_| r.random_range(-1e3..1e3)).collect()))
                .collect()
        };
        let (img, lid) = (gen(&mut r), gen(&mut r));
        let fused = run_fusion_pipeline(
            &support::stream(Modality::Image, &img),
            &support::stream(Modality::Lidar, &lid),
            &stages,
        )
        .map_err(|e| e.to_string())?;
        for ((f, (_, a)), (_, b)) in fused.iter().zip(&img).zip(&lid) {
            let mut joined = support::scale01(&support::med3(a));
            joined.extend(support::scale01(&support::med3(b)));
            let expect = support::interp_to(&joined, length);
            if f.vector.len() != length || f.vector.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("fused vector out of shape or range: {:?}", f.vector));
            }
            for (g, e) in f.vector.iter().zip(&expect) {
                worst = worst.max((g - e).abs());
            }
            vectors += 1;
        }
    }
    let msg = format!("1000 rows idempotent; {vectors} fused vectors of length {length}, max |diff| = {worst:e}");
    if worst <= FUSION_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac8_robustness() -> Outcome {
    let mut r = support::rng(8);
    let cfg = ParserConfig::default();
    let (mut parsed, mut rejected) = (0, 0);
    for i in 0..100_000 {
        let bytes = support::fuzz_input(&mut r);
        match catch_unwind(AssertUnwindSafe(|| parse_query_bytes(&bytes, &cfg))) {
            Err(_) => return Err(format!("parser panicked on input {i}: {:?}", String::from_utf8_lossy(&bytes))),
            Ok(Ok(_)) => parsed += 1,
            Ok(Err(QueryError::Parse { .. } | QueryError::UnknownField { .. } | QueryError::InvalidIr(_))) => {
                rejected += 1
            }
            Ok(Err(e)) => return Err(format!("unexpected error kind on input {i}: {e:?}")),
        }
    }
    for sql in support::ADVERSARIAL_SQL {
        for profile in [Profile::Default, Profile::Compat] {
            if validate_sql(&SqlText(sql.to_string()), profile).is_empty() {
                return Err(format!("accepted mutation statement: {sql}"));
            }
        }
    }
    Ok(format!("100000 inputs: {parsed} parsed, {rejected} parse errors, 0 panics; 50/50 mutation statements rejected"))
}

fn ac9_determinism() -> Outcome {
    let store = constant_velocity_store(&SyntheticConfig { seed: 9, ..SyntheticConfig::default() });
    let stub = ConstantVelocityStub { offset: (0.3, -0.2) };
    let cfg = ExperimentConfig { max_scenarios: Some(200), seed: 9, workers: 2, ..ExperimentConfig::default() };
    let a = render_report(&run_experiment(&store, &stub, &cfg).map_err(|e| e.to_string())?, ReportFormat::Json)
        .map_err(|e| e.to_string())?;
    let b = render_report(&run_experiment(&store, &stub, &cfg).map_err(|e| e.to_string())?, ReportFormat::Json)
        .map_err(|e| e.to_string())?;
    if a == b {
        Ok(format!("two runs, {} identical bytes", a.len()))
    } else {
        Err("reports differ".into())
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn ac10_index() -> Outcome {
    let (entities, frames) = (2000usize, 500usize);
    let mut r = support::rng(10);
    let mut store = KnowledgeStore::new(StoreConfig::default());
    let t0 = envkb::eval::synthetic::SYNTHETIC_EPOCH;
    for f in 0..frames {
        let t = t0.plus_millis(f as i64 * 100);
        for e in 0..entities {
            store
                .insert(EntityRecord::Vehicles(VehicleRecord {
                    entity_id: format!("v{e}"),
                    timestamp: t,
                    x: r.random_range(0.0..2000.0),
                    y: r.random_range(0.0..2000.0),
                    vx: 0.0,
                    vy: 0.0,
                    ax: 0.0,
                    ay: 0.0,
                    class: VehicleClass::Car,
                }))
                .map_err(|e| e.to_string())?;
        }
    }
    let radius = 30.0;
    let (mut fast, mut slow, mut hits) = (Vec::new(), Vec::new(), 0);
    for _ in 0..100 {
        let c = Point::new(r.random_range(0.0..2000.0), r.random_range(0.0..2000.0));
        let a = t0.plus_millis(r.random_range(0..frames as i64 - 10) * 100);
        let b = a.plus_millis(1000);

        let start = Instant::now();
        let got = store.query_radius(Table::Vehicles, c, radius, a, b).map_err(|e| e.to_string())?;
        fast.push(start.elapsed());

        let start = Instant::now();
        let scan: Vec<&EntityRecord> = store
            .records(Table::Vehicles)
            .filter(|rec| {
                let p = rec.position().unwrap();
                let t = rec.timestamp().unwrap();
                (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y) <= radius * radius && a <= t && t <= b
            })
            .collect();
        slow.push(start.elapsed());

        let mut gk = support::keys(&got);
        let mut sk = support::keys(&scan);
        gk.sort();
        sk.sort();
        if gk != sk {
            return Err(format!("index returned {} rows, scan {} rows at {c:?}", gk.len(), sk.len()));
        }
        hits += gk.len();
    }
    let (f, s) = (median(fast), median(slow));
    let speedup = s.as_secs_f64() / f.as_secs_f64().max(1e-9);
    let msg = format!(
        "{} records, {hits} hits over 100 queries, median index {f:.2?} vs scan {s:.2?} ({speedup:.0}x)",
        store.len_of(Table::Vehicles)
    );
    if speedup >= MIN_SPEEDUP {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", "metric oracle equivalence", ac1_metrics),
        ("AC2", "query compiler soundness", ac2_query_soundness),
        ("AC3", "golden verbalization", ac3_verbalization),
        ("AC4", "compatibility SQL golden", ac4_compat_sql),
        ("AC5", "closed-loop zero error", ac5_closed_loop),
        ("AC6", "retrieval difference", ac6_retrieval_difference),
        ("AC7", "normalization idempotence and fusion composition", ac7_normalization_and_fusion),
        ("AC8", "parser and validator robustness", ac8_robustness),
        ("AC9", "report determinism", ac9_determinism),
        ("AC10", "index performance", ac10_index),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
