use edge_entropy::fixtures;
use edge_entropy::graph::save_graph;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn edgeent(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeent")).args(args).current_dir(cwd).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_bipartite_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    save_graph(&fixtures::bipartite(), &tmp.path().join("g")).unwrap();
    let v = json(&edgeent(&["analyze", "g"], tmp.path()));
    assert_eq!(v["report"]["edge_entropy"], 0.0);
    assert_eq!(v["report"]["intra_class_ratio"], 0.0);
    assert_eq!(v["config"]["graph"], "g");
}

#[test]
fn analyze_csv_header_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    save_graph(&fixtures::two_cliques(), &tmp.path().join("g")).unwrap();
    let out = edgeent(&["analyze", "g", "--format", "csv"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "graph,num_nodes,num_classes,num_edges,edge_entropy,intra_class_ratio,clustering_coefficient,per_class_entropy"
    );
    assert!(lines[1].starts_with("g,8,2,24,0,1,1,"));
}

#[test]
fn missing_label_file_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    std::fs::create_dir(&dir).unwrap();
    std::fs::write(dir.join("edges.txt"), "0 1\n").unwrap();
    let out = edgeent(&["analyze", "g"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("labels.txt"), "{err}");
}

#[test]
fn generate_presets_hit_their_entropy() {
    let tmp = tempfile::tempdir().unwrap();
    for (preset, target) in [("dense_low", 0.521), ("sparse_high", 0.974)] {
        let v = json(&edgeent(&["generate", "--preset", preset, "--seed", "1", "--out", preset], tmp.path()));
        assert_eq!(v["config"]["num_nodes"], 3000);
        assert_eq!(v["config"]["seed"], 1);
        let realized = v["verification"]["realized_entropy"].as_f64().unwrap();
        assert!((realized - target).abs() < 0.01, "{preset}: {realized}");
        let analyzed = json(&edgeent(&["analyze", preset], tmp.path()));
        assert_eq!(analyzed["report"]["edge_entropy"].as_f64().unwrap(), realized);
        assert!(tmp.path().join(preset).join("verification.json").exists());
        assert!(tmp.path().join(preset).join("manifest.json").exists());
    }
}

#[test]
fn generate_usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let conflicting = edgeent(&["generate", "--preset", "dense_low", "--nodes", "10", "--class-sizes", "3,3,3", "--out", "g"], tmp.path());
    assert_eq!(conflicting.status.code(), Some(2));
    let unknown = edgeent(&["generate", "--preset", "medium", "--out", "g"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
    let bad_rows = edgeent(&["generate", "--p", "[[0.5,0.4],[0.5,0.5]]", "--nodes", "20", "--out", "g"], tmp.path());
    assert_eq!(bad_rows.status.code(), Some(2));
}

#[test]
fn strict_generation_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["generate", "--t", "[[9,1],[1,9]]", "--nodes", "30", "--sparsity", "0.2", "--strict", "--tolerance", "1e-9", "--out", "g"];
    let out = edgeent(&args, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    // the dataset is still written
    assert!(tmp.path().join("g/edges.txt").exists());
}

#[test]
fn train_emits_outcome_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    json(&edgeent(&["generate", "--preset", "sparse_low", "--nodes", "150", "--out", "g"], tmp.path()));
    let v = json(&edgeent(&["train", "g", "--epochs", "30", "--seed", "3", "--shift", "identity"], tmp.path()));
    assert!(v["accuracy"].as_f64().is_some());
    assert_eq!(v["loss_curve"].as_array().unwrap().len(), 30);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["config"]["shift"], "identity");
    assert_eq!(v["config"]["net"]["epochs"], 30);
}

const PLAN: &str = r#"{
    "datasets": [
        {"name": "low", "source": {"preset": {"preset": "sparse_low", "num_nodes": 120, "seed": 1}}},
        {"name": "high", "source": {"preset": {"preset": "sparse_high", "num_nodes": 120, "seed": 2}}}
    ],
    "model": {"hidden": [8], "degree": 2, "learning_rate": 0.01, "decay": 0.0005, "epochs": 15},
    "trials": 1
}"#;

#[test]
fn experiment_dry_run_runs_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("plan.json"), PLAN).unwrap();
    let v = json(&edgeent(&["experiment", "plan.json", "--dry-run", "--out", "res"], tmp.path()));
    assert_eq!(v["cells"], 36);
    assert_eq!(v["training_runs"], 36);
    assert_eq!(v["plan"]["base_seed"], 0);
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn experiment_bundle_shape_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("plan.json"), PLAN).unwrap();
    for out in ["a", "b"] {
        let v = json(&edgeent(&["experiment", "plan.json", "--out", out], tmp.path()));
        assert_eq!(v["plan"]["fractions"].as_array().unwrap().len(), 9);
    }
    let read = |p: &str| std::fs::read(tmp.path().join(p)).unwrap();
    for f in ["results.json", "curves.csv", "table.csv"] {
        assert_eq!(read(&format!("a/{f}")), read(&format!("b/{f}")), "{f}");
    }
    let curves = String::from_utf8(read("a/curves.csv")).unwrap();
    assert_eq!(curves.lines().filter(|l| l.starts_with("low,")).count(), 18);
    assert_eq!(curves.lines().next().unwrap(), "dataset,fraction,mode,mean,std,valid_trials,improvement");
    let table = String::from_utf8(read("a/table.csv")).unwrap();
    assert!(table.lines().last().unwrap().starts_with("# spearman_rho="), "{table}");

    let report = edgeent(&["report", "a/results.json", "--format", "csv", "--fraction", "0.5"], tmp.path());
    assert!(report.status.success());
    assert_eq!(String::from_utf8(report.stdout).unwrap().lines().count(), 4);
}

#[test]
fn experiment_rejects_bad_plans() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("plan.json"), PLAN.replace("\"trials\": 1", "\"trials\": 0")).unwrap();
    assert_eq!(edgeent(&["experiment", "plan.json", "--out", "r"], tmp.path()).status.code(), Some(2));
    assert_eq!(edgeent(&["experiment", "missing.json", "--out", "r"], tmp.path()).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("plan.json"), PLAN.replace("\"trials\": 1", "\"trials\": 2, \"fractions\": [0.3]")).unwrap();
    json(&edgeent(&["experiment", "plan.json", "--jobs", "1", "--out", "one"], tmp.path()));
    json(&edgeent(&["experiment", "plan.json", "--jobs", "3", "--out", "three"], tmp.path()));
    let read = |p: &str| std::fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("one/results.json"), read("three/results.json"));
}
