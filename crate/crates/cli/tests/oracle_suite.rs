//! Checks on the reference implementations themselves, plus the golden
//! full-attention fixture. Set `TREEKV_REGEN_GOLDEN=1` to rewrite it.

mod oracle;

use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::{json, Value};

use oracle::{oracle_dwt, oracle_full_attention, oracle_tree_sim, TreeScores};
use treekv_core::{generate_weights, Engine, ModelDims, PolicyKind, ProtectedZones};

const GOLDEN_SEED: u64 = 20;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/v1/full_attention_3tok.json")
}

fn golden_inputs() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0, -0.5, 0.25], vec![0.0, 1.0, 0.5, -1.0], vec![-0.75, 0.5, 1.0, 0.0]]
}

fn golden_dims() -> ModelDims {
    ModelDims::new(2, 2, 4, 2, 0)
}

#[test]
fn golden_full_attention_fixture() {
    let weights = generate_weights(GOLDEN_SEED, golden_dims()).unwrap();
    let outputs = oracle_full_attention(&weights, &golden_inputs());
    let path = golden_path();
    if std::env::var_os("TREEKV_REGEN_GOLDEN").is_some() {
        let doc = json!({
            "seed": GOLDEN_SEED,
            "dims": {"layers": 2, "heads": 2, "d_model": 4, "d_head": 2},
            "inputs": golden_inputs(),
            "outputs": outputs,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let stored: Vec<Vec<Vec<f64>>> = serde_json::from_value(doc["outputs"].clone()).unwrap();
    assert_eq!(stored.len(), 3);
    for (got, want) in outputs.iter().flatten().zip(stored.iter().flatten()) {
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "oracle drifted from golden file: {a} vs {b}");
        }
    }
    let mut engine = Engine::new(&weights, PolicyKind::Full, 3, ProtectedZones::NONE).unwrap();
    for (x, want) in golden_inputs().iter().zip(&stored) {
        let record = engine.step(x).unwrap();
        for (s, w) in record.streams.iter().zip(want) {
            assert!(oracle::rel_err(&s.output, w) < 1e-6);
        }
    }
}

#[test]
fn single_token_attends_to_its_own_value() {
    let dims = ModelDims::new(1, 1, 4, 4, 0);
    let weights = generate_weights(3, dims).unwrap();
    let x = vec![0.5, -1.0, 2.0, 0.0];
    let out = oracle_full_attention(&weights, std::slice::from_ref(&x));
    let w_v = weights.layers[0].heads[0].w_v.data();
    let v: Vec<f64> = (0..4).map(|c| (0..4).map(|r| x[r] * w_v[r * 4 + c] as f64).sum()).collect();
    assert!(oracle::rel_err(&out[0][0], &v) < 1e-15);
}

#[test]
fn tree_sim_walkthrough() {
    let sim = oracle_tree_sim(4, 17, TreeScores::SelectLeft);
    assert_eq!(sim.retained, vec![12, 14, 16, 17]);
    assert_eq!(sim.cursors, vec![1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4, 1]);
}

#[test]
fn tree_sim_keeps_everything_when_large_enough() {
    let sim = oracle_tree_sim(10, 7, TreeScores::SelectLeft);
    assert_eq!(sim.retained, (1..=7).collect::<Vec<_>>());
    assert!(sim.cursors.is_empty());
}

#[test]
fn dwt_oracle_examples() {
    let a = oracle_dwt(&[1.0, 1.0, 1.0, 1.0], 1);
    let r2 = std::f64::consts::SQRT_2;
    assert!((a[0][0] - r2).abs() < 1e-15 && (a[0][1] - r2).abs() < 1e-15);
    let b = oracle_dwt(&[1.0, 2.0, 3.0, 4.0], 2);
    assert!((b[0][0] - 5.0).abs() < 1e-12);
    assert!((b[1][0] + 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn equal_scores_reduce_to_select_left(c in 2usize..20, extra in 1usize..60, e in 0i32..8) {
        // dyadic, so running sums and averages stay exact
        let v = 2f64.powi(-e);
        let steps = c + extra;
        let rows: Vec<Vec<f64>> = (1..=steps).map(|t| vec![v; t.min(c + 1)]).collect();
        prop_assert_eq!(
            oracle_tree_sim(c, steps, TreeScores::Rows(&rows)),
            oracle_tree_sim(c, steps, TreeScores::SelectLeft)
        );
    }
}
