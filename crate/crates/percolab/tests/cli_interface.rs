//! End-to-end checks of the command-line surface: exit codes, config echo,
//! and bitwise reproducibility.

use std::process::{Command, Output};

fn percolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

#[test]
fn isometry_pass_exits_zero() {
    let out = percolab(&["isometry", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["report"]["verdict"], serde_json::Value::Bool(true));
    assert_eq!(json["report"]["pairs_checked"], 7140);
    assert_eq!(json["config"]["subcommand"], "isometry");
}

#[test]
fn verify_failure_exits_one_with_counterexample() {
    let out = percolab(&[
        "verify",
        "--graph",
        "middlelayers:k=3",
        "--prop",
        "P3v",
        "--lmax",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let report = &json["report"][0];
    assert_eq!(report["verdict"], serde_json::Value::Bool(false));
    assert!(!report["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn verify_pass_exits_zero() {
    let out = percolab(&[
        "verify",
        "--graph",
        "hypercube:n=5",
        "--prop",
        "P1,P2,P3iii",
        "--K",
        "2",
        "--lmax",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(percolab(&["sweep"]).status.code(), Some(2)); // missing args
    assert_eq!(
        percolab(&["simulate", "--graph", "klein:n=1", "--p", "0.2"]).status.code(),
        Some(2)
    ); // unknown family
    assert_eq!(
        percolab(&["verify", "--graph", "hypercube:n=4", "--prop", "P99"]).status.code(),
        Some(2)
    ); // unknown property
}

#[test]
fn sweep_is_byte_identical_and_monotone() {
    let args = [
        "sweep",
        "--graph",
        "hypercube:n=4",
        "--rule",
        "majority",
        "--pgrid",
        "0:1:9",
        "--trials",
        "400",
        "--seed",
        "7",
    ];
    let a = percolab(&args);
    let b = percolab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "same argv must give identical bytes");
    let text = stdout_of(&a);
    assert!(text.lines().next().unwrap().starts_with("# subcommand=sweep"));
    let phi: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("graph,"))
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(phi.len(), 9);
    assert!(phi.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn sweep_json_format() {
    let out = percolab(&[
        "sweep",
        "--graph",
        "hypercube:n=3",
        "--pgrid",
        "0:1:3",
        "--trials",
        "200",
        "--seed",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let rows = json["report"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["phi_hat"], 1.0);
    assert_eq!(
        percolab(&["sweep", "--graph", "hypercube:n=3", "--pgrid", "0:1:3", "--format", "yaml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_exports_round_counts() {
    let out = percolab(&[
        "simulate",
        "--graph",
        "permutahedron:n=3",
        "--rule",
        "rneib:r=1",
        "--p",
        "0.2",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let report = &json["report"];
    assert_eq!(report["percolated"], serde_json::Value::Bool(true));
    let sizes = report["per_round_sizes"].as_array().unwrap();
    assert_eq!(
        sizes.last().unwrap().as_u64().unwrap(),
        24,
        "r=1 fills the permutahedron from any seed"
    );
    assert_eq!(
        report["newly_per_round"].as_array().unwrap().len() + 1,
        sizes.len()
    );
}

#[test]
fn localprob_reports_estimate_with_config() {
    let out = percolab(&[
        "localprob",
        "--graph",
        "hypercube:n=16",
        "--vertex",
        "root",
        "--t",
        "1",
        "--p",
        "0.45",
        "--trials",
        "2000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(json["config"]["t"], 1);
    let est = json["report"]["estimate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&est));
}

#[test]
fn localprob_star_layer_selection() {
    let out = percolab(&[
        "localprob",
        "--graph",
        "stars:n=10,q=2",
        "--layer",
        "2",
        "--t",
        "1",
        "--p",
        "0.4",
        "--trials",
        "1000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    // canonical layer-2 representative: two centres then leaves
    assert_eq!(json["config"]["vertex"], "0011111111");
}

#[test]
fn pc_reports_bracket() {
    let out = percolab(&[
        "pc",
        "--graph",
        "hypercube:n=2",
        "--rule",
        "rneib:r=1",
        "--trials",
        "5000",
        "--tol",
        "0.01",
        "--seed",
        "13",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let lo = json["report"]["p_lo"].as_f64().unwrap();
    let hi = json["report"]["p_hi"].as_f64().unwrap();
    assert!(lo < hi && hi - lo <= 0.01 + 1e-12);
    assert!((lo - 0.159).abs() < 0.05);
}

#[test]
fn starlayers_tabulates_and_percolates() {
    let out = percolab(&["starlayers", "--n", "6", "--q", "2", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(json["report"]["i1"], 2);
    assert_eq!(json["report"]["deterministic"]["percolated"], true);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join("percolab-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.csv");
    let out = percolab(&[
        "sweep",
        "--graph",
        "hypercube:n=3",
        "--pgrid",
        "0:1:3",
        "--trials",
        "100",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("graph,rule,p,"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn cap_env_var_is_respected() {
    let out = Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(["simulate", "--graph", "hypercube:n=12", "--p", "0.2", "--seed", "1"])
        .env("PERCOLAB_MAX_VERTICES", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("cap"), "stderr: {err}");
}
