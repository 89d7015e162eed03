mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use common::{smoke_config, MockServer};
use ebg::backend::HttpBackend;
use ebg::cli;
use ebg::io::{load_run, population_file};
use ebg_core::llm::{BackendError, ChatBackend, CompletionRequest, DecodingParams};

fn no_env(_: &str) -> Option<String> {
    None
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
fn ebg(args: &[&str], env: &dyn Fn(&str) -> Option<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ebg").chain(args.iter().copied());
    let code = cli::run(argv, env, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, value: &serde_json::Value) -> String {
    let path = dir.join("input.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn decoding() -> DecodingParams {
    DecodingParams {
        model: "mock".into(),
        temperature: 0.8,
        max_tokens: 64,
    }
}

#[test]
fn http_backend_sends_chat_request() {
    let server = MockServer::start();
    let backend = HttpBackend::new(&server.url, Some("k".into()), Duration::from_secs(5));
    let params = decoding();
    let reply = backend
        .complete(&CompletionRequest {
            prompt: "hello",
            params: &params,
        })
        .unwrap();
    assert_eq!(reply, common::POOL[0]);
    let seen = server.seen.lock().unwrap();
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer k"));
    assert_eq!(seen[0].body["model"], "mock");
    assert_eq!(seen[0].body["messages"][0]["role"], "user");
    assert_eq!(seen[0].body["messages"][0]["content"], "hello");
    assert_eq!(seen[0].body["max_tokens"], 64);
}

#[test]
fn http_backend_retries_transient_statuses_only() {
    let params = decoding();
    let request = CompletionRequest {
        prompt: "p",
        params: &params,
    };
    let server = MockServer::with_failures(vec![503, 429]);
    let backend = HttpBackend::new(&server.url, None, Duration::from_secs(5)).with_retries(3, Duration::from_millis(1));
    assert!(backend.complete(&request).is_ok());
    assert_eq!(server.requests(), 3);

    let server = MockServer::with_failures(vec![400]);
    let backend = HttpBackend::new(&server.url, None, Duration::from_secs(5)).with_retries(3, Duration::from_millis(1));
    match backend.complete(&request) {
        Err(BackendError::Http { status: 400, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(server.requests(), 1);
}

#[test]
fn record_then_replay_reproduces_the_run() {
    let server = MockServer::start();
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &smoke_config(&server.url));
    let rec = tmp.path().join("rec");
    let (code, out, err) = ebg(
        &["generate", "--config", &config, "--out", s(&rec), "--record"],
        &no_env,
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("best expression:"));
    let transcript = rec.join("transcript.jsonl");
    assert_eq!(
        fs::read_to_string(&transcript).unwrap().lines().count(),
        server.requests()
    );

    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let (code, _, err) = ebg(
            &[
                "generate",
                "--config",
                &config,
                "--out",
                s(&dir),
                "--replay",
                s(&transcript),
            ],
            &no_env,
        );
        assert_eq!(code, 0, "{err}");
        for g in 0..3 {
            let f = population_file(g);
            assert_eq!(fs::read(rec.join(&f)).unwrap(), fs::read(dir.join(&f)).unwrap(), "{f}");
        }
        assert_eq!(
            fs::read(rec.join("benchmarks.jsonl")).unwrap(),
            fs::read(dir.join("benchmarks.jsonl")).unwrap()
        );
        let (_, record) = load_run(&dir).unwrap();
        assert!(record.complete);
        assert_eq!(record.populations.len(), 3);
    }
}

#[test]
fn environment_supplies_the_endpoint() {
    let server = MockServer::start();
    let tmp = tempfile::tempdir().unwrap();
    let mut value = smoke_config("unused");
    value["backend"].as_object_mut().unwrap().remove("endpoint_url");
    value["engine"]["max_generations"] = 1.into();
    let config = write_config(tmp.path(), &value);
    let out = tmp.path().join("run");
    let args = ["generate", "--config", &config, "--out", s(&out)];

    let (code, _, err) = ebg(&args, &no_env);
    assert_eq!(code, 1);
    assert!(err.contains("endpoint_url"), "{err}");

    let url = server.url.clone();
    let env = move |k: &str| match k {
        "EBG_API_URL" => Some(url.clone()),
        "EBG_API_KEY" => Some("secret".into()),
        _ => None,
    };
    let (code, _, err) = ebg(&args, &env);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        server.seen.lock().unwrap()[0].authorization.as_deref(),
        Some("Bearer secret")
    );
    assert!(!fs::read_to_string(out.join("config.json")).unwrap().contains("secret"));
}

#[test]
fn exhausted_transcript_aborts_with_partial_run() {
    let server = MockServer::start();
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &smoke_config(&server.url));
    let rec = tmp.path().join("rec");
    assert_eq!(
        ebg(
            &["generate", "--config", &config, "--out", s(&rec), "--record"],
            &no_env
        )
        .0,
        0
    );
    let full = fs::read_to_string(rec.join("transcript.jsonl")).unwrap();
    let short: Vec<&str> = full.lines().take(6).collect();
    let cut = tmp.path().join("short.jsonl");
    fs::write(&cut, short.join("\n")).unwrap();

    let dir = tmp.path().join("partial");
    let (code, _, err) = ebg(
        &["generate", "--config", &config, "--out", s(&dir), "--replay", s(&cut)],
        &no_env,
    );
    assert_eq!(code, 2, "{err}");
    let best: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("best.json")).unwrap()).unwrap();
    assert_eq!(best["complete"], false);
    assert!(best["error"].is_string());
}

fn smoke_run(tmp: &Path) -> std::path::PathBuf {
    let server = MockServer::start();
    let config = write_config(tmp, &smoke_config(&server.url));
    let dir = tmp.join("run");
    let (code, _, err) = ebg(&["generate", "--config", &config, "--out", s(&dir)], &no_env);
    assert_eq!(code, 0, "{err}");
    dir
}

#[test]
fn lineage_outputs_have_expected_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = smoke_run(tmp.path());
    let (code, out, err) = ebg(&["lineage", "--run", s(&dir)], &no_env);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("lineage individuals"));
    let (_, record) = load_run(&dir).unwrap();
    let n = record.benchmarks.len();

    let dot = fs::read_to_string(dir.join("lineage.dot")).unwrap();
    let nodes = dot.lines().filter(|l| l.contains("[label=")).count();
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
    assert_eq!(nodes, n);
    let expected: usize = record.benchmarks.iter().map(|b| b.parent_ids.len()).sum();
    assert_eq!(edges.len(), expected);
    let solid = record
        .benchmarks
        .iter()
        .filter(|b| b.origin == ebg_core::engine::Origin::Crossover)
        .count();
    assert_eq!(edges.iter().filter(|e| e.contains("style=solid")).count(), 2 * solid);

    let distances = fs::read_to_string(dir.join("distances.csv")).unwrap();
    assert_eq!(distances.lines().count(), 1 + n * (n - 1) / 2);
    let embedding = fs::read_to_string(dir.join("embedding.csv")).unwrap();
    assert_eq!(embedding.lines().count(), 1 + n);
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("operator_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn corrupt_lineage_line_is_reported_with_its_number() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = smoke_run(tmp.path());
    let path = dir.join("lineage.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    lines[1] = "{\"child_id\": ".into();
    fs::write(&path, lines.join("\n")).unwrap();
    let (code, _, err) = ebg(&["lineage", "--run", s(&dir)], &no_env);
    assert_eq!(code, 1);
    assert!(err.contains("lineage.jsonl:2:"), "{err}");
}

#[test]
fn trajectories_write_one_table_per_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = smoke_run(tmp.path());
    let (code, _, err) = ebg(&["trajectories", "--run", s(&dir)], &no_env);
    assert_eq!(code, 0, "{err}");
    let (_, record) = load_run(&dir).unwrap();
    let out = dir.join("trajectories");
    let generations = fs::read_to_string(out.join("generations.csv")).unwrap();
    assert_eq!(generations.lines().count(), 1 + 3);
    for id in record.populations.last().unwrap() {
        let table = fs::read_to_string(out.join(format!("benchmark_{id}.csv"))).unwrap();
        let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + 2 * 3);
        assert_eq!(header[1], "GA_0");
        assert_eq!(header[4], "DE_0");
        assert_eq!(table.lines().count(), 1 + 51);
    }
}

#[test]
fn analyze_expression_and_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let (code, stdout, err) = ebg(
        &[
            "analyze",
            "--expr",
            "x[0]**2 + 2*x[1]**2 + x[2]**2 + x[3]**2 + x[4]**2 + x[0]*x[1]",
            "--what",
            "both",
            "--out",
            s(&out),
        ],
        &no_env,
    );
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("x[4]"));
    let sobol: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sobol.json")).unwrap()).unwrap();
    assert_eq!(sobol["first_order"].as_array().unwrap().len(), 5);
    assert!(out.join("curvature.json").exists());

    let (code, _, err) = ebg(
        &["analyze", "--expr", "sqrt(x[0])", "--what", "sobol", "--out", s(&out)],
        &no_env,
    );
    assert_eq!(code, 2);
    assert!(err.contains("x[0]") || err.contains('['), "{err}");

    let dir = smoke_run(tmp.path());
    let (code, _, err) = ebg(&["analyze", "--run", s(&dir), "--what", "sobol"], &no_env);
    assert_eq!(code, 0, "{err}");
    let sobol: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("sobol.json")).unwrap()).unwrap();
    assert!(sobol["benchmark_id"].is_u64());
}

#[test]
fn evaluate_reports_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, err) = ebg(
        &[
            "evaluate",
            "--expr",
            "f(x) = x[0]**2 + abs(x[1])",
            "--trials",
            "2",
            "--out",
            s(tmp.path()),
        ],
        &no_env,
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("fitness:"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(report["a1_bests"].as_array().unwrap().len(), 2);

    let (code, _, err) = ebg(&["evaluate", "--expr", "sqrt(x[0])", "--trials", "2"], &no_env);
    assert_eq!(code, 1);
    assert!(err.contains("pre-validation"), "{err}");
    let (code, _, _) = ebg(&["evaluate", "--expr", "log(x[0])"], &no_env);
    assert_eq!(code, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ebg");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    assert_eq!(status(&["--help"]).status.code(), Some(0));
    assert_eq!(status(&[]).status.code(), Some(1));
    assert_eq!(status(&["frobnicate"]).status.code(), Some(1));
    let printed = status(&["--print-default-config"]);
    assert_eq!(printed.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(parsed["engine"]["population_size"], 10);

    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        &serde_json::json!({"engine": {"population_size": 0, "crossover_rate": 2.0}}),
    );
    let out = status(&["generate", "--config", &bad, "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("engine.population_size") && stderr.contains("engine.crossover_rate"),
        "{stderr}"
    );

    let unknown = write_config(tmp.path(), &serde_json::json!({"engine": {"popsize": 3}}));
    assert_eq!(
        status(&["generate", "--config", &unknown, "--out", "x"]).status.code(),
        Some(1)
    );
}

/// Talks to the endpoint in `EBG_API_URL`; runs only with `EBG_LIVE_TEST=1`.
#[test]
fn live_endpoint_smoke() {
    if std::env::var("EBG_LIVE_TEST").as_deref() != Ok("1") {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut value = smoke_config("from-env");
    value["backend"].as_object_mut().unwrap().remove("endpoint_url");
    value["backend"].as_object_mut().unwrap().remove("model");
    value["engine"]["population_size"] = 2.into();
    value["engine"]["max_generations"] = 2.into();
    value["engine"]["fitness"]["trials"] = 1.into();
    let config = write_config(tmp.path(), &value);
    let env = |k: &str| std::env::var(k).ok();
    let dir = tmp.path().join("live");
    let (code, _, err) = ebg(&["generate", "--config", &config, "--out", s(&dir), "--record"], &env);
    assert_eq!(code, 0, "{err}");
    assert!(
        fs::read_to_string(dir.join("transcript.jsonl"))
            .unwrap()
            .lines()
            .count()
            >= 2
    );
}
