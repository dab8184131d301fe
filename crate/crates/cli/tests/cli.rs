use std::path::Path;
use std::process::{Command, Output};

use treekv::commands::{run_analyze, run_compare, run_map, run_prefill, PrefillInput};
use treekv::trace::{self, TraceRecord};
use treekv::RunConfig;

fn treekv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treekv")).args(args).output().unwrap()
}

fn small(policy: &str) -> RunConfig {
    RunConfig {
        policy: policy.into(),
        cache_size: 8,
        zones: "none".into(),
        seq_len: 32,
        layers: 1,
        heads: 2,
        d_model: 8,
        d_head: 4,
        vocab: 16,
        levels: 2,
        exclude: 2,
        ..RunConfig::default()
    }
}

fn decode_to(dir: &Path, config: &RunConfig) -> trace::Trace {
    let path = dir.join(format!("{}.jsonl", config.policy));
    let file = std::fs::File::create(&path).unwrap();
    treekv::commands::run_decode(config, std::io::BufWriter::new(file)).unwrap();
    trace::read(&path).unwrap()
}

#[test]
fn exit_codes() {
    let out = treekv(&["decode", "--policy", "lru"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lru"));
    let out = treekv(&["decode", "--policy", "treekv", "--cache-size", "8", "--zones", "sink=4,recent=4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = treekv(&["map", "--trace", "/nonexistent/trace.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn select_left_walkthrough_via_binary() {
    let out = treekv(&[
        "decode", "--policy", "treekv-left", "--cache-size", "4", "--zones", "none", "--seq-len", "17", "--layers", "1",
        "--heads", "1", "--d-model", "8", "--d-head", "4",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert_eq!(last, r#"{"type":"end","steps":17,"retained":[[11,13,15,16]]}"#);
}

#[test]
fn full_policy_never_evicts_and_maps_to_ones() {
    let dir = tempfile::tempdir().unwrap();
    let t = decode_to(dir.path(), &small("full"));
    assert!(t.steps.iter().all(|s| s.evictions.is_empty()));
    let map = run_map(&t).unwrap();
    let row = map.lines().nth(1).unwrap();
    assert!(row.split(',').skip(1).all(|v| v == "1"), "{row}");
}

#[test]
fn single_head_map_is_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { heads: 1, ..small("treekv") };
    let map = run_map(&decode_to(dir.path(), &config)).unwrap();
    let row: Vec<&str> = map.lines().nth(1).unwrap().split(',').skip(1).collect();
    assert_eq!(row.len(), 32);
    assert!(row.iter().all(|v| *v == "0" || *v == "1"));
    assert_eq!(row.iter().filter(|v| **v == "1").count(), 8);
}

#[test]
fn trace_replay_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let t = decode_to(dir.path(), &small("h2o"));
    trace::verify_replay(&t).unwrap();

    let path = dir.path().join("h2o.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    let truncated = dir.path().join("cut.jsonl");
    std::fs::write(&truncated, cut[..cut.len() - 3].join("\n")).unwrap();
    let out = treekv(&["map", "--trace", truncated.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analyze_row_count_and_constant_signal() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { seq_len: 40, cache_size: 64, levels: 3, exclude: 4, ..small("full") };
    let mut t = decode_to(dir.path(), &config);
    let csv = run_analyze(&t, 3, 4).unwrap();
    assert_eq!(csv.lines().count() - 1, (40 - 2 * 4) * 3);
    assert!(matches!(run_analyze(&t, 6, 0), Err(treekv::CliError::Input(_))));

    let step = t.steps.iter_mut().find(|s| s.analysis).unwrap();
    for s in &mut step.streams {
        let n = s.attention.as_ref().unwrap().len();
        s.attention = Some(vec![1.0 / n as f64; n]);
        s.values = Some(vec![vec![0.5; 4]; n]);
    }
    let csv = run_analyze(&t, 1, 0).unwrap();
    for line in csv.lines().skip(1) {
        let magnitude: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(magnitude.abs() < 1e-15, "{line}");
    }
}

#[test]
fn compare_overlaps() {
    let a = small("treekv");
    let rows = run_compare(&[a.clone(), a.clone()], 2).unwrap();
    assert_eq!(rows[1].overlap, 1.0);

    let zones = "sink=4,recent=4".to_string();
    let full = RunConfig { zones: zones.clone(), ..small("full") };
    let streaming = RunConfig { zones, ..small("streaming") };
    let rows = run_compare(&[full, streaming], 1).unwrap();
    assert!((rows[1].overlap - 8.0 / 32.0).abs() < 1e-12);

    let other = RunConfig { seed: 9, ..small("h2o") };
    assert!(matches!(run_compare(&[a, other], 1), Err(treekv::CliError::Input(_))));
}

#[test]
fn prefill_fixed_scores() {
    let config = RunConfig { policy: "treekv".into(), seq_len: 10, block_size: 2, cache_blocks: 3, ..small("treekv") };
    let out = run_prefill(&config, &PrefillInput::BlockScores(vec![0.1, 0.4, 0.2, 0.3, 0.9])).unwrap();
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["retained_blocks"], serde_json::json!([1, 2, 3, 4]));

    let everything = RunConfig { cache_blocks: 8, ..config.clone() };
    let out = run_prefill(&everything, &PrefillInput::BlockScores(vec![0.5; 5])).unwrap();
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["retained_blocks"], serde_json::json!([0, 1, 2, 3, 4]));

    let single = RunConfig { block_size: 10, ..config };
    let out = run_prefill(&single, &PrefillInput::BlockScores(vec![1.0])).unwrap();
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["retained_blocks"], serde_json::json!([0]));
}

#[test]
fn prefill_from_model_and_from_file() {
    let config = RunConfig { seq_len: 48, block_size: 4, cache_blocks: 5, ..small("treekv") };
    let out = run_prefill(&config, &PrefillInput::Model).unwrap();
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines.last().unwrap()["type"], "summary");

    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.json");
    std::fs::write(&scores, "[0.1, 0.4, 0.2, 0.3, 0.9]").unwrap();
    let out = treekv(&[
        "prefill", "--seq-len", "10", "--block-size", "2", "--cache-blocks", "3", "--block-scores",
        scores.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[1,2,3,4]"));
}

#[test]
fn records_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let t = decode_to(dir.path(), &small("tova"));
    let line = serde_json::to_string(&TraceRecord::Step(t.steps[20].clone())).unwrap();
    let back: TraceRecord = serde_json::from_str(&line).unwrap();
    assert_eq!(back, TraceRecord::Step(t.steps[20].clone()));
}
