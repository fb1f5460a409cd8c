use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use clonekit::evaluator::{parse_timing_csv, CloneLabel, GroundTruth, LabelRecord};
use clonekit::extractor::Method;
use clonekit::io::{read_jsonl, write_jsonl};
use clonekit::synth::{generate, SynthConfig};
use clonekit::{ClonePair, PairKey};
use serde_json::Value;

fn clonekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clonekit"))
        .args(args)
        .env_remove("RUST_LOG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn clonekit")
}

fn ok(args: &[&str]) -> Output {
    let out = clonekit(args);
    assert!(out.status.success(), "clonekit {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_corpus(root: &Path, methods: usize) {
    generate(&SynthConfig { methods, seed: 5, ..Default::default() }).write_to(root).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_file() {
            out.insert(path.clone(), std::fs::read(&path).unwrap());
        }
    }
    out
}

const PUBLISHED_MATRICES: &str = r#"{
  "evaluations": [
    {"corpus": "open-source", "detector": "overlap", "tp": 247, "fp": 1, "fn": 616, "tn": 136},
    {"corpus": "open-source", "detector": "identifier", "tp": 57, "fp": 1, "fn": 806, "tn": 136},
    {"corpus": "industrial", "detector": "overlap", "tp": 35, "fp": 10, "fn": 28, "tn": 128}
  ],
  "distributions": [
    {"corpus": "open-source", "counts": [53, 118, 641, 51, 137]}
  ]
}"#;

#[test]
fn evaluate_matrices_reports_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("table1.json");
    std::fs::write(&input, PUBLISHED_MATRICES).unwrap();
    let out = dir.path().join("eval");
    ok(&["evaluate", "--matrices", p(&input), "--out", p(&out)]);
    let metrics = read_json(&out.join("metrics.json"));
    let rows = metrics.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["precision_percent"], 99.6);
    assert_eq!(rows[0]["recall_percent"], 28.6);
    assert_eq!(rows[1]["precision_percent"], 98.3);
    assert_eq!(rows[1]["recall_percent"], 6.6);
    assert_eq!(rows[2]["precision_percent"], 77.8);
    assert_eq!(rows[2]["fn"], 28);
    let dist = read_json(&out.join("type-distribution.json"));
    let shares = dist[0]["distribution"]["shares"].as_array().unwrap();
    let pct: Vec<f64> = shares.iter().map(|s| s["percent"].as_f64().unwrap()).collect();
    assert_eq!(pct, vec![5.3, 11.8, 64.1, 5.1, 13.7]);

    ok(&["report", "--out", p(&out)]);
    let report = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("| open-source | overlap | 99.6 | 28.6 |"), "{report}");
    assert!(report.contains("64.1"));
}

#[test]
fn missing_inputs_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["detect"], "bags.jsonl"),
        (vec!["filter"], "bags.jsonl"),
        (vec!["embed"], "repr-identifier.jsonl"),
        (vec!["embed", "--repr", "ast"], "repr-ast.jsonl"),
        (vec!["serve", "--port", "0"], "candidates.jsonl"),
        (vec!["evaluate"], "pairs-overlap.jsonl"),
        (vec!["report"], "metrics.json"),
    ];
    for (args, file) in cases {
        let mut full = args.clone();
        full.extend(["--out", p(&empty)]);
        let out = clonekit(&full);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(file), "{args:?}: {err}");
    }
    let out = clonekit(&["extract", "--corpus", p(&dir.path().join("nope")), "--out", p(&empty)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert!(!clonekit(&["detect", "--out", p(&empty), "--theta", "1.5"]).status.success());
}

#[test]
fn pipeline_is_composable_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    synth_corpus(&corpus, 120);
    let run = dir.path().join("run");
    let embed = [
        "embed", "--out", p(&run), "--dim", "8", "--word-epochs", "1", "--rae-epochs", "1", "--delta-quantile", "0.02",
    ];
    let steps: Vec<Vec<&str>> = vec![
        vec!["extract", "--corpus", p(&corpus), "--out", p(&run)],
        vec!["detect", "--out", p(&run)],
        vec!["filter", "--out", p(&run), "--sample", "50"],
        embed.to_vec(),
    ];
    for s in &steps {
        ok(s);
    }
    let first = snapshot(&run);
    for name in [
        "methods.jsonl",
        "bags.jsonl",
        "repr-identifier.jsonl",
        "repr-ast.jsonl",
        "pairs-overlap.jsonl",
        "candidates.jsonl",
        "embeddings-identifier.jsonl",
        "pairs-identifier.jsonl",
        "pairs-ast.jsonl",
        "pairs-combination.jsonl",
        "train-log-ast.json",
        "manifest.json",
    ] {
        assert!(first.contains_key(&run.join(name)), "missing {name}");
    }
    let methods: Vec<Method> = read_jsonl(&run.join("methods.jsonl")).unwrap();
    assert!(methods.len() > 100);
    assert!(methods.iter().all(|m| !m.raw_body.is_empty()));
    let manifest = read_json(&run.join("manifest.json"));
    for cmd in ["extract", "detect", "filter", "embed"] {
        assert_eq!(manifest[cmd]["command"], cmd);
    }
    assert_eq!(manifest["extract"]["min_lines"], 10);
    assert_eq!(manifest["detect"]["detect_theta"], 0.9);
    assert_eq!(manifest["filter"]["filter_theta"], 0.7);

    let ident: Vec<ClonePair> = read_jsonl(&run.join("pairs-identifier.jsonl")).unwrap();
    let ast: Vec<ClonePair> = read_jsonl(&run.join("pairs-ast.jsonl")).unwrap();
    let comb: Vec<ClonePair> = read_jsonl(&run.join("pairs-combination.jsonl")).unwrap();
    let union: std::collections::BTreeSet<PairKey> = ident.iter().chain(&ast).map(|p| p.key()).collect();
    assert_eq!(comb.iter().map(|p| p.key()).collect::<std::collections::BTreeSet<_>>(), union);

    for s in &steps {
        ok(s);
    }
    let second = snapshot(&run);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (path, bytes) in &first {
        assert!(second[path] == *bytes, "{} changed between identical runs", path.display());
    }
}

#[test]
fn sequential_flag_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    synth_corpus(&corpus, 80);
    let a = dir.path().join("a");
    ok(&["extract", "--corpus", p(&corpus), "--out", p(&a)]);
    ok(&["detect", "--out", p(&a)]);
    let par = std::fs::read(a.join("pairs-overlap.jsonl")).unwrap();
    let bags = std::fs::read(a.join("bags.jsonl")).unwrap();
    ok(&["--sequential", "extract", "--corpus", p(&corpus), "--out", p(&a)]);
    ok(&["detect", "--sequential", "--out", p(&a)]);
    assert_eq!(std::fs::read(a.join("bags.jsonl")).unwrap(), bags);
    assert_eq!(std::fs::read(a.join("pairs-overlap.jsonl")).unwrap(), par);
}

#[test]
fn env_overrides_and_per_manifest_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    synth_corpus(&corpus, 60);
    let run = dir.path().join("run");
    ok(&["extract", "--corpus", p(&corpus), "--out", p(&run)]);
    let out = Command::new(env!("CARGO_BIN_EXE_clonekit"))
        .args(["detect", "--input", p(&run), "--per-manifest"])
        .env("CLONEKIT_OUT", p(&run))
        .env("CLONEKIT_THETA", "0.75")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<PathBuf> = std::fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir() && p.file_name().unwrap().to_str().unwrap().starts_with("run-"))
        .collect();
    assert_eq!(runs.len(), 1);
    let manifest = read_json(&runs[0].join("manifest.json"));
    assert_eq!(manifest["detect"]["detect_theta"], 0.75);
    assert!(runs[0].join("pairs-overlap.jsonl").is_file());
    assert!(!run.join("pairs-overlap.jsonl").exists());

    ok(&["detect", "--input", p(&run), "--out", p(&run), "--per-manifest", "--theta", "0.95"]);
    let count = std::fs::read_dir(&run).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(count, 2, "a second threshold gets its own run directory");
}

#[test]
fn evaluate_from_labels_builds_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    synth_corpus(&corpus, 120);
    let run = dir.path().join("run");
    ok(&["extract", "--corpus", p(&corpus), "--out", p(&run)]);
    ok(&["detect", "--out", p(&run)]);
    ok(&["filter", "--out", p(&run)]);
    let candidates: Vec<clonekit::evaluator::CandidatePair> = read_jsonl(&run.join("candidates.jsonl")).unwrap();
    let predicted: Vec<ClonePair> = read_jsonl(&run.join("pairs-overlap.jsonl")).unwrap();
    assert!(candidates.len() >= 4);
    let predicted_ids: std::collections::HashSet<String> = predicted.iter().map(|p| p.key().id()).collect();
    let mut records = Vec::new();
    let mut expected = [0u64; 4];
    for (i, c) in candidates.iter().enumerate() {
        let label = if i % 2 == 0 { CloneLabel::Type3 } else { CloneLabel::NotClone };
        for rater in ["r1", "r2"] {
            records.push(LabelRecord { pair_id: c.id(), rater: rater.into(), label, timestamp: i as u64 });
        }
        let hit = predicted_ids.contains(&c.id());
        let slot = match (label.is_clone(), hit) {
            (true, true) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (false, false) => 3,
        };
        expected[slot] += 1;
    }
    records.push(LabelRecord { pair_id: candidates[0].id(), rater: "r3".into(), label: CloneLabel::Type1, timestamp: 99 });
    write_jsonl(&run.join("labels.jsonl"), &records).unwrap();
    ok(&["evaluate", "--out", p(&run), "--corpus-name", "synthetic"]);
    let truth: Vec<GroundTruth> = read_jsonl(&run.join("truth.jsonl")).unwrap();
    assert_eq!(truth.len(), candidates.len());
    let conf = read_json(&run.join("confusion-overlap.json"));
    let m = &conf["matrix"];
    assert_eq!([m["tp"].as_u64(), m["fp"].as_u64(), m["fn"].as_u64(), m["tn"].as_u64()], expected.map(Some));
    let metrics = read_json(&run.join("metrics.json"));
    assert_eq!(metrics[0]["corpus"], "synthetic");
    ok(&["report", "--out", p(&run)]);
    assert!(std::fs::read_to_string(run.join("report.md")).unwrap().contains("| synthetic | overlap |"));
}

#[test]
fn bench_writes_sorted_timing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    ok(&["bench", "--synthetic", "300,100,200", "--out", p(&out)]);
    let runs = parse_timing_csv(&std::fs::read_to_string(out.join("timing.csv")).unwrap()).unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.windows(2).all(|w| w[0].loc < w[1].loc));
    assert_eq!(runs[0].corpus, "synthetic-100");
    assert!(runs.iter().all(|r| r.detector == "overlap" && r.seconds >= 0.0));

    let corpora = dir.path().join("corpora");
    synth_corpus(&corpora.join("small"), 40);
    synth_corpus(&corpora.join("large"), 90);
    let out2 = dir.path().join("bench2");
    ok(&["bench", "--corpora", p(&corpora), "--out", p(&out2)]);
    let runs = parse_timing_csv(&std::fs::read_to_string(out2.join("timing.csv")).unwrap()).unwrap();
    assert_eq!(runs.iter().map(|r| r.corpus.as_str()).collect::<Vec<_>>(), ["small", "large"]);
    assert!(!clonekit(&["bench", "--out", p(&out2)]).status.success());
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut s = std::net::TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    s.write_all(request.as_bytes()).ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    synth_corpus(&corpus, 80);
    let run = dir.path().join("run");
    ok(&["extract", "--corpus", p(&corpus), "--out", p(&run)]);
    ok(&["filter", "--out", p(&run)]);
    let port = 20_000 + (std::process::id() % 20_000) as u16;
    let mut child = Command::new(env!("CARGO_BIN_EXE_clonekit"))
        .args(["serve", "--out", p(&run), "--port", &port.to_string()])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut reply = None;
    while Instant::now() < deadline {
        reply = http(port, "GET /api/progress HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
        if reply.is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    let pair = http(port, "GET /api/pair?rater=t HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    child.kill().unwrap();
    child.wait().unwrap();
    let reply = reply.expect("service did not come up");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"remaining\""));
    assert!(pair.unwrap().contains("\"raw_body\""));
    assert!(run.join("manifest.json").is_file());
}
