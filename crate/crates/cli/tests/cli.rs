//! End-to-end command-line pipeline tests: gen -> design -> simulate ->
//! decode, plus the trial/sweep CSV surface and format round-trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgeprobe"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn edgeprobe");
    assert!(
        out.status.success(),
        "edgeprobe {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("edgeprobe-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_recovers_the_sampled_graph() {
    let dir = tmpdir("pipeline");
    let graph = dir.join("graph.txt");
    let design = dir.join("design.txt");
    let outcomes = dir.join("outcomes.txt");
    let edges = dir.join("edges.txt");
    let metrics = dir.join("metrics.txt");

    run_ok(&[
        "gen", "--n", "64", "--theta", "0.5", "--seed", "11",
        "--out", path_str(&graph),
    ]);
    run_ok(&[
        "design", "--n", "64", "--theta", "0.5", "--seed", "11",
        "--out", path_str(&design),
    ]);
    run_ok(&[
        "simulate", "--design", path_str(&design), "--graph", path_str(&graph),
        "--out", path_str(&outcomes),
    ]);
    run_ok(&[
        "decode", "--design", path_str(&design), "--outcomes", path_str(&outcomes),
        "--out", path_str(&edges), "--metrics", path_str(&metrics),
    ]);

    let graph_text = fs::read_to_string(&graph).unwrap();
    let decoded = fs::read_to_string(&edges).unwrap();
    assert_eq!(graph_text, decoded, "decoded edge list differs from the sampled graph");

    let metrics_text = fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.contains("status=completed"));
    assert!(metrics_text.contains("outcome_checks="));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn tables_decoder_agrees_with_basic_over_the_cli() {
    let dir = tmpdir("tables");
    let graph = dir.join("graph.txt");
    let design = dir.join("design.txt");
    let outcomes = dir.join("outcomes.txt");

    run_ok(&["gen", "--n", "32", "--theta", "0.55", "--seed", "3", "--out", path_str(&graph)]);
    run_ok(&["design", "--n", "32", "--theta", "0.55", "--seed", "3", "--out", path_str(&design)]);
    run_ok(&[
        "simulate", "--design", path_str(&design), "--graph", path_str(&graph),
        "--out", path_str(&outcomes),
    ]);
    let basic = run_ok(&[
        "decode", "--design", path_str(&design), "--outcomes", path_str(&outcomes),
        "--algo", "basic",
    ]);
    let tables = run_ok(&[
        "decode", "--design", path_str(&design), "--outcomes", path_str(&outcomes),
        "--algo", "tables",
    ]);
    assert_eq!(basic.stdout, tables.stdout);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn partitioned_pipeline_runs_end_to_end() {
    let dir = tmpdir("part");
    let graph = dir.join("graph.txt");
    let design = dir.join("design.txt");
    let outcomes = dir.join("outcomes.txt");
    let edges = dir.join("edges.txt");

    run_ok(&["gen", "--n", "128", "--theta", "0.5", "--seed", "21", "--out", path_str(&graph)]);
    run_ok(&[
        "design", "--n", "128", "--theta", "0.5", "--seed", "21", "--partitioned",
        "--gamma", "0.3", "--c", "8", "--out", path_str(&design),
    ]);
    run_ok(&[
        "simulate", "--design", path_str(&design), "--graph", path_str(&graph),
        "--out", path_str(&outcomes),
    ]);
    run_ok(&[
        "decode", "--design", path_str(&design), "--outcomes", path_str(&outcomes),
        "--out", path_str(&edges),
    ]);
    // superset of the truth always holds per decoded subgraph
    let graph_text = fs::read_to_string(&graph).unwrap();
    let decoded = fs::read_to_string(&edges).unwrap();
    let got: Vec<&str> = decoded.lines().skip(1).collect();
    for edge in graph_text.lines().skip(1) {
        assert!(got.contains(&edge), "missing {edge}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn trial_csv_is_deterministic_across_worker_counts() {
    let args = |workers: &str, out: &str| {
        vec![
            "trial".to_string(), "--n".into(), "64".into(), "--theta".into(), "0.5".into(),
            "--algo".into(), "basic".into(), "--trials".into(), "6".into(),
            "--seed0".into(), "42".into(), "--workers".into(), workers.into(),
            "--out".into(), out.into(),
        ]
    };
    let dir = tmpdir("csv");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let av: Vec<String> = args("1", path_str(&a));
    let bv: Vec<String> = args("2", path_str(&b));
    let out = bin().args(&av).output().unwrap();
    assert!(out.status.success());
    let out = bin().args(&bv).output().unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("algo,n,theta,q,kbar,C1,C2,Cp,C3,c,cp,gamma,seed,success,tests,checks,max_pd,status,ns"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn perm_census_reports_exact_pairwise_independence() {
    let out = run_ok(&["perm-census", "--m", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("pairwise_independent=true"), "{text}");
    assert!(text.contains("min=1 max=1"), "{text}");
}

#[test]
fn export_expands_every_test() {
    let dir = tmpdir("export");
    let design = dir.join("design.txt");
    run_ok(&[
        "design", "--n", "16", "--kbar", "4", "--seed", "2", "--c1", "2", "--c2", "4",
        "--cp", "1", "--out", path_str(&design),
    ]);
    let out = run_ok(&["export", "--design", path_str(&design)]);
    let text = String::from_utf8_lossy(&out.stdout);
    // closed form: 3 levels of 32 tests plus 3 final rounds of 32
    assert_eq!(text.lines().count(), 192);
    assert!(text.lines().next().unwrap().starts_with("0:"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn calibrate_writes_a_loadable_config() {
    let dir = tmpdir("calib");
    let cfg = dir.join("cal.kv");
    run_ok(&[
        "calibrate", "--n", "64", "--theta", "0.5", "--algo", "basic",
        "--target", "0.8", "--trials", "5", "--seed0", "7",
        "--out", path_str(&cfg),
    ]);
    let text = fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("C1="));
    assert!(text.contains("mode=calibrated"));
    // resolves through the --config path
    let design = dir.join("design.txt");
    run_ok(&[
        "design", "--n", "64", "--theta", "0.5", "--seed", "1",
        "--config", path_str(&cfg), "--out", path_str(&design),
    ]);
    fs::remove_dir_all(&dir).ok();
}
