mod support;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use envkb::eval::{
    constant_velocity_store, render_report, ring_scene, run_experiment, ExperimentConfig, Metric, ReportFormat,
    SyntheticConfig,
};
use envkb::rag::{
    run_proactive_cycle, ChatRequest, ConstantVelocityStub, CycleConfig, EchoStub, HttpConfig, HttpEndpoint,
    LlmEndpoint, Mode, ScriptedStub, UnavailableStub,
};

fn small_store() -> envkb::store::KnowledgeStore {
    constant_velocity_store(&SyntheticConfig { vehicles: 6, steps: 25, ..SyntheticConfig::default() })
}

fn config(max: usize) -> ExperimentConfig {
    ExperimentConfig { max_scenarios: Some(max), ..ExperimentConfig::default() }
}

#[test]
fn constant_velocity_world_is_predicted_exactly() {
    let report = run_experiment(&small_store(), &ConstantVelocityStub::default(), &config(40)).unwrap();
    assert_eq!(report.scenario_count, 40);
    for arm in &report.arms {
        assert_eq!(arm.successes, 40, "{:?}", arm.failures);
        for m in &arm.metrics {
            assert!(m.ade.unwrap().abs() < 1e-9 && m.fde.unwrap().abs() < 1e-9, "{m:?}");
        }
    }
}

#[test]
fn constant_offset_shows_up_as_its_length() {
    let stub = ConstantVelocityStub { offset: (3.0, 4.0) };
    let report = run_experiment(&small_store(), &stub, &config(20)).unwrap();
    for arm in &report.arms {
        for m in &arm.metrics {
            assert!((m.ade.unwrap() - 5.0).abs() < 1e-9);
            assert!((m.fde.unwrap() - 5.0).abs() < 1e-9);
        }
    }
    assert!(report.improvements(Metric::Ade).iter().all(|(_, imp)| imp.abs() < 1e-9));
}

#[test]
fn reports_are_identical_across_worker_counts() {
    let store = small_store();
    let one = run_experiment(&store, &ConstantVelocityStub { offset: (0.5, -0.25) }, &config(30)).unwrap();
    let four = run_experiment(
        &store,
        &ConstantVelocityStub { offset: (0.5, -0.25) },
        &ExperimentConfig { workers: 4, ..config(30) },
    )
    .unwrap();
    assert_eq!(render_report(&one, ReportFormat::Json).unwrap(), render_report(&four, ReportFormat::Json).unwrap());
}

#[test]
fn endpoint_failures_are_counted_not_fatal() {
    let report = run_experiment(&small_store(), &UnavailableStub, &config(10)).unwrap();
    for arm in &report.arms {
        assert_eq!(arm.successes, 0);
        assert_eq!(arm.failures.get("endpoint_unavailable"), Some(&10));
        assert!(arm.metrics.iter().all(|m| m.ade.is_none() && m.n == 0));
    }
    let report = run_experiment(&small_store(), &EchoStub, &config(5)).unwrap();
    let base = report.arm(Mode::Baseline).unwrap();
    assert_eq!(base.failures.get("malformed_prediction"), Some(&5));
}

#[test]
fn retrieval_adds_exactly_the_far_vehicles() {
    for k in [0usize, 1, 5] {
        let (store, t) = ring_scene(3, k, 5, 11 + k as u64);
        let cfg = CycleConfig::default();
        let stub = ConstantVelocityStub::default();
        let base = run_proactive_cycle(&store, "ego", t, 3, &stub, Mode::Baseline, &cfg).unwrap();
        let rag = run_proactive_cycle(&store, "ego", t, 3, &stub, Mode::Senserag, &cfg).unwrap();
        let b = support::vehicle_sentences(&base.bundle.user_message());
        let r = support::vehicle_sentences(&rag.bundle.user_message());
        assert!(b.is_subset(&r));
        assert_eq!(r.len() - b.len(), k, "k = {k}");
        assert_eq!(b.len(), 3);
    }
}

#[test]
fn scripted_replies_drive_the_cycle() {
    let (store, t) = ring_scene(1, 1, 5, 3);
    let stub = ScriptedStub {
        query: vec!["not a query".into()],
        prediction: vec!["1. (0,0)".into(), "step 1: (1, 2)\nstep 2: (3, 4)".into()],
    };
    let out = run_proactive_cycle(&store, "ego", t, 2, &stub, Mode::Senserag, &CycleConfig::default()).unwrap();
    assert!(out.retrieval.as_ref().unwrap().query.fallback, "unparseable query falls back to the template");
    assert_eq!(out.prediction.points, vec![envkb::Point::new(1.0, 2.0), envkb::Point::new(3.0, 4.0)]);
    assert!(out.transcript.len() >= 3);
}

#[test]
fn cycle_logs_land_in_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { run_dir: Some(dir.path().to_path_buf()), ..config(3) };
    run_experiment(&small_store(), &ConstantVelocityStub::default(), &cfg).unwrap();
    let n = walk(dir.path());
    assert_eq!(n, 6, "one transcript per scenario and arm");
}

fn walk(p: &std::path::Path) -> usize {
    std::fs::read_dir(p)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            if e.file_type().unwrap().is_dir() {
                walk(&e.path())
            } else {
                1
            }
        })
        .sum()
}

/// A chat-completions server that answers like the constant-velocity stub.
fn spawn_model_server(requests: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let stub = ConstantVelocityStub::default();
        for stream in listener.incoming().take(requests) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req: ChatRequest = serde_json::from_slice(&body).unwrap();
            let content = stub.complete(&req).unwrap();
            let reply =
                serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
            write!(stream, "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}", reply.len()).unwrap();
        }
    });
    format!("http://{addr}/v1")
}

#[test]
fn http_endpoint_round_trip_matches_the_stub() {
    let (store, t) = ring_scene(2, 2, 5, 5);
    let url = spawn_model_server(2);
    let http = HttpEndpoint::new(HttpConfig { base_url: url, retries: 0, ..HttpConfig::default() }).unwrap();
    let cfg = CycleConfig::default();
    let remote = run_proactive_cycle(&store, "ego", t, 4, &http, Mode::Senserag, &cfg).unwrap();
    let local =
        run_proactive_cycle(&store, "ego", t, 4, &ConstantVelocityStub::default(), Mode::Senserag, &cfg).unwrap();
    assert_eq!(remote.prediction.points, local.prediction.points);
    assert_eq!(remote.bundle, local.bundle);
}
