use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_glmcausal");

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fig1() -> String {
    root().join("fixtures/fig1.dag").display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("GLMCAUSAL_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty(), "success wrote to stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let o = run(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
    String::from_utf8(o.stderr).unwrap()
}

fn validate(schema: &str, json: &str) {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("schemas").join(schema)).unwrap()).unwrap();
    let instance: Value = serde_json::from_str(json).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema:?}: {errors:?}");
}

fn simulate(dir: &Path, scenario: &str, n: usize, seed: u64) -> String {
    let out = dir.join(format!("{scenario}-{seed}.csv")).display().to_string();
    ok(&["simulate", "--scenario", scenario, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &out]);
    out
}

#[test]
fn adjust_prints_figure_one_set() {
    let text = ok(&["dag", "adjust", "--dag", &fig1()]);
    assert!(text.contains("{Age, Sex, TumourSite, TumourSize}"), "{text}");
}

#[test]
fn invalid_set_exits_three_citing_condition_two() {
    let err = fails(&["dag", "adjust", "--dag", &fig1(), "--set", "Age,PlateletCount"], 3);
    assert!(err.contains("condition 2"), "{err}");
    assert!(err.contains("Chemotherapy -> PlateletCount -> VTE"), "{err}");
}

#[test]
fn unblockable_graph_exits_three() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("rev.dag");
    std::fs::write(&p, "dag { X [exposure] Y [outcome] Y -> X }").unwrap();
    let err = fails(&["dag", "adjust", "--dag", p.to_str().unwrap()], 3);
    assert!(err.contains("no valid adjustment set"), "{err}");
}

#[test]
fn parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.dag");
    std::fs::write(&p, "dag { A -> B -> A }").unwrap();
    fails(&["dag", "paths", "--dag", p.to_str().unwrap(), "--from", "A", "--to", "B"], 2);
    std::fs::write(&p, "dag { A => B }").unwrap();
    fails(&["dag", "classify", "--dag", p.to_str().unwrap()], 2);
    let err = fails(&["dag", "classify", "--dag", "/nonexistent.dag"], 2);
    assert!(err.contains("/nonexistent.dag"));
    fails(&["dag", "frobnicate"], 2);
}

#[test]
fn chain_independence_listed() {
    let chain = root().join("fixtures/chain.dag");
    let text = ok(&["dag", "independencies", "--dag", chain.to_str().unwrap()]);
    assert_eq!(text.trim(), "A _||_ C | {B}");
}

#[test]
fn classify_names_the_mediator() {
    let text = ok(&["dag", "classify", "--dag", &fig1(), "--node", "PlateletCount"]);
    assert!(text.contains("mediator"), "{text}");
}

#[test]
fn simulate_writes_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "confounding", 10_000, 42);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    let b = dir.path().join("again.csv");
    ok(&["simulate", "--scenario", "confounding", "--n", "10000", "--seed", "42", "--out", b.to_str().unwrap()]);
    assert_eq!(text, std::fs::read_to_string(b).unwrap());

    let f = simulate(dir.path(), "figure1", 10, 1);
    let header = std::fs::read_to_string(f).unwrap().lines().next().unwrap().to_string();
    let mut cols: Vec<&str> = header.split(',').collect();
    cols.sort();
    assert_eq!(cols, ["Age", "Chemotherapy", "PlateletCount", "Sex", "TumourSite", "TumourSize", "VTE"]);
}

#[test]
fn simulate_errors() {
    let err = fails(&["simulate", "--scenario", "nope", "--n", "10"], 2);
    assert!(err.contains("nope"));
    fails(&["simulate", "--scenario", "collider", "--n", "0"], 2);
    fails(&["simulate", "--n", "10"], 2);
}

#[test]
fn seed_precedence() {
    let env = |val: Option<&str>, args: &[&str]| {
        let mut c = Command::new(BIN);
        c.args(args).env_remove("GLMCAUSAL_SEED");
        if let Some(v) = val {
            c.env("GLMCAUSAL_SEED", v);
        }
        c.output().unwrap().stdout
    };
    let base = ["simulate", "--scenario", "mediator", "--n", "5"];
    let default = env(None, &base);
    assert_eq!(default, env(None, &[&base[..], &["--seed", "20240601"]].concat()));
    let from_env = env(Some("5"), &base);
    assert_ne!(default, from_env);
    assert_eq!(from_env, env(None, &[&base[..], &["--seed", "5"]].concat()));
    assert_eq!(env(None, &[&base[..], &["--seed", "7"]].concat()), env(Some("5"), &[&base[..], &["--seed", "7"]].concat()));
}

#[test]
fn fit_reports() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "confounding", 400, 3);
    let text = ok(&["fit", "--data", &data, "--outcome", "Y", "--select", "backward", "--criterion", "aic"]);
    assert!(text.contains("Model: Y ~"), "{text}");
    let text = ok(&["fit", "--data", &data, "--outcome", "Y", "--select", "lasso", "--family", "gaussian"]);
    assert!(text.contains("Lambda path: 100 values"), "{text}");
    assert!(text.contains("CV-best lambda"), "{text}");
    let err = fails(&["fit", "--data", &data, "--outcome", "missing_col"], 2);
    assert!(err.contains("missing_col"), "{err}");
    fails(&["fit", "--data", "/nonexistent.csv", "--outcome", "Y"], 2);
}

#[test]
fn effect_exit_codes_and_text() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "figure1", 3000, 7);
    let text = ok(&["effect", "--dag", &fig1(), "--data", &data, "--family", "gaussian"]);
    assert_eq!(text.lines().filter(|l| l.contains("total causal effect")).count(), 1);
    assert!(text.lines().next().unwrap().starts_with("Exposure"));
    assert!(text.contains("Adjustment set: {Age, Sex, TumourSite, TumourSize}"));
    let err = fails(
        &["effect", "--dag", &fig1(), "--data", &data, "--set", "Age,Sex,TumourSite,TumourSize,PlateletCount"],
        4,
    );
    assert!(err.contains("condition 2") && err.contains("Chemotherapy -> PlateletCount -> VTE"), "{err}");

    let rev = dir.path().join("rev.dag");
    std::fs::write(&rev, "dag { Chemotherapy [exposure] VTE [outcome] VTE -> Chemotherapy }").unwrap();
    fails(&["effect", "--dag", rev.to_str().unwrap(), "--data", &data], 3);
}

#[test]
fn role_flags_override_annotations() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "figure1", 500, 2);
    let json = ok(&[
        "--format", "json", "effect", "--dag", &fig1(), "--data", &data, "--exposure", "PlateletCount",
    ]);
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["exposure"], "PlateletCount");
    assert_eq!(v["outcome"], "VTE");
    assert_eq!(v["adjustment_set"], serde_json::json!(["Chemotherapy"]));
}

/// Every JSON-producing invocation, each validated against its schema and
/// run twice.
#[test]
fn json_outputs_are_schema_valid_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let fig_data = simulate(dir.path(), "figure1", 1500, 7);
    let conf = simulate(dir.path(), "confounding", 300, 1);
    let out = dir.path().join("sim.csv").display().to_string();
    let f = fig1();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("dag-paths.schema.json", vec!["dag", "paths", "--dag", &f]),
        ("dag-adjust.schema.json", vec!["dag", "adjust", "--dag", &f, "--set", "Age,Sex,TumourSite,TumourSize"]),
        ("dag-independencies.schema.json", vec!["dag", "independencies", "--dag", &f]),
        ("dag-independencies.schema.json", vec!["dag", "independencies", "--dag", &f, "--data", &fig_data]),
        ("dag-classify.schema.json", vec!["dag", "classify", "--dag", &f]),
        ("effect-report.schema.json", vec!["effect", "--dag", &f, "--data", &fig_data]),
        ("fit-report.schema.json", vec!["fit", "--data", &conf, "--outcome", "Y"]),
        ("fit-report.schema.json", vec!["fit", "--data", &conf, "--outcome", "Y", "--select", "best-subsets", "--cv", "5"]),
        ("fit-report.schema.json", vec!["fit", "--data", &conf, "--outcome", "Y", "--select", "lasso-backward", "--holdout", &conf]),
        ("simulate-summary.schema.json", vec!["simulate", "--scenario", "collider", "--n", "50", "--out", &out]),
    ];
    for (schema, args) in cases {
        let args: Vec<&str> = ["--format", "json"].into_iter().chain(args).collect();
        let first = ok(&args);
        validate(schema, &first);
        assert_eq!(first, ok(&args), "{args:?}");
        let threaded: Vec<&str> = ["--jobs", "3"].into_iter().chain(args.iter().copied()).collect();
        assert_eq!(first, ok(&threaded), "{args:?}");
    }
}

#[test]
fn schema_rejects_relabelled_coefficient() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "confounding", 200, 4);
    let dag = dir.path().join("c.dag");
    std::fs::write(&dag, "dag { X [exposure] Y [outcome] C -> X  C -> Y  X -> Y }").unwrap();
    let json = ok(&["--format", "json", "effect", "--dag", dag.to_str().unwrap(), "--data", &data]);
    let mut v: Value = serde_json::from_str(&json).unwrap();
    v["non_causal_coefficients"]["C"]["label"] = "total causal effect".into();
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(root().join("schemas/effect-report.schema.json")).unwrap(),
    )
    .unwrap();
    assert!(!jsonschema::validator_for(&schema).unwrap().is_valid(&v));
}
