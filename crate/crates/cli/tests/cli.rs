//! Runs the `dht` binary on small documents and checks artifacts and exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dht_core::probkit::{Alphabet, Channel, JointPmf};
use dht_core::problem::{HypothesisProblem, Variant};
use serde_json::{json, Value};
use tempfile::TempDir;

fn dht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dht")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, doc: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Data lines of a CSV artifact, after the provenance comment.
fn csv_lines(text: &str) -> Vec<String> {
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# dht "), "provenance line: {first}");
    lines.map(str::to_string).collect()
}

fn binary_doc(aux: Option<Value>) -> Value {
    let mut doc = json!({ "binary": { "p0": 0.2, "q0": 0.3, "p1": 0.4, "r": 0.1 } });
    if let Some(a) = aux {
        doc["aux"] = a;
    }
    doc
}

fn low_rate_aux() -> Value {
    json!({ "s": [[0.9, 0.1], [0.5, 0.5]], "t": [1.0, 0.0], "w": [[0.5, 0.5], [0.5, 0.5]] })
}

fn ax(spec: &[(&str, usize)]) -> Vec<Alphabet> {
    spec.iter().map(|&(n, k)| Alphabet::new(n, k)).collect()
}

#[test]
fn dmc_evaluates_a_given_auxiliary() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "dmc.json", &binary_doc(Some(low_rate_aux())));
    let out = dht(&["dmc", "--input", s(&input)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    let theta = v["report"]["theta"].as_f64().unwrap();
    assert!((theta - 0.1453).abs() < 1e-3, "theta {theta}");
    assert_eq!(v["report"]["active"], "standard");
    assert_eq!(v["report"]["feasible"], true);
}

#[test]
fn dmc_search_output_round_trips_as_an_auxiliary() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "dmc.json", &binary_doc(None));
    let out = dht(&["dmc", "--input", s(&input), "--starts", "2", "--evals", "200"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    let theta = v["report"]["theta"].as_f64().unwrap();
    let again = write(&dir, "again.json", &binary_doc(Some(v["aux"].clone())));
    let out = dht(&["dmc", "--input", s(&again)]);
    let w = stdout_json(&out);
    assert!((w["report"]["theta"].as_f64().unwrap() - theta).abs() < 1e-9);
}

#[test]
fn infeasible_auxiliary_exits_with_three() {
    // A near-identity quantizer needs more rate than a very noisy channel has.
    let aux = json!({ "s": [[1.0, 0.0], [0.0, 1.0]], "t": [1.0, 0.0], "w": [[0.5, 0.5], [0.5, 0.5]] });
    let mut doc = binary_doc(Some(aux));
    doc["binary"]["r"] = json!(0.45);
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "dmc.json", &doc);
    let out = dht(&["dmc", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["report"]["feasible"], false);
    let record: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(record["error"], "infeasible");
}

#[test]
fn malformed_documents_report_line_and_field() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"binary\": {\n    \"p0\": 0.2,\n    \"q0\": \"high\"\n  }\n}\n").unwrap();
    let out = dht(&["dmc", "--input", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("binary.q0") && err.contains("line 4"), "{err}");

    let bad_pmf = json!({ "problem": { "p": { "axes": [{ "name": "X", "size": 2 }], "probs": [0.5, 0.6] } } });
    let path = write(&dir, "pmf.json", &bad_pmf);
    let out = dht(&["dmc", "--input", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("problem.p"), "{}", stderr(&out));

    let out = dht(&["dmc", "--input", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_dht"))
        .args(["repro-fig3", "--lo", "0.5", "--hi", "0.4"])
        .env("DHT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_sweep_gives_a_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("fig3.csv");
    let out = dht(&["repro-fig3", "--lo", "0.3", "--hi", "0.2", "--output", s(&path)]);
    assert!(out.status.success());
    assert_eq!(csv_lines(&fs::read_to_string(&path).unwrap()), ["r,theta_uep,theta_nouep,active_label,error"]);
    let out = dht(&["repro-fig7", "--points", "0"]);
    assert!(out.status.success());
    assert_eq!(csv_lines(&String::from_utf8(out.stdout).unwrap()).len(), 1);
}

#[test]
fn fig3_sweep_is_reproducible_and_complete() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = |p: &Path| {
        dht(&["repro-fig3", "--lo", "0.44", "--hi", "0.45", "--starts", "2", "--evals", "150", "--output", s(p)]);
    };
    args(&a);
    args(&b);
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let lines = csv_lines(&String::from_utf8(ta).unwrap());
    assert_eq!(lines.len(), 4);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[0], "0.44");
    assert!(row[1].parse::<f64>().unwrap() >= row[2].parse::<f64>().unwrap());
    assert!(!row[3].is_empty(), "label column");
}

#[test]
fn table1_reports_boundaries_in_a_narrow_window() {
    let out = dht(&["repro-table1", "--lo", "0.03", "--hi", "0.07", "--step", "0.04", "--resolution", "0.01", "--starts", "4", "--evals", "400"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = csv_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines[0], "scheme,r,below,above");
    let uep: Vec<&String> = lines.iter().filter(|l| l.starts_with("uep,")).collect();
    assert_eq!(uep.len(), 1, "{lines:?}");
    let r: f64 = uep[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((0.03..=0.07).contains(&r));
}

#[test]
fn fig7_columns_are_ordered() {
    let out = dht(&["repro-fig7", "--lo", "0.5", "--hi", "2", "--points", "3", "--starts", "8", "--evals", "100"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = csv_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines[0], "P,achievable_hybrid,achievable_separate,upper,gap");
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[2] <= v[1] + 1e-12 && v[1] <= v[3] + 1e-12, "{l}");
    }
}

#[test]
fn gauss_reports_every_closed_form() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "g.json", &json!({ "rho0": 0.6, "c": 1.0, "rho": 0.8, "sigmay_sq": 1.5, "power": 2.0, "c1": 0.5, "c2": 0.5 }));
    let out = dht(&["gauss", "--input", s(&input), "--starts", "8", "--evals", "100"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    let want = -0.5 * (1.0 - 0.36 + 0.36 * 0.25f64).log2();
    assert!((v["p2p_optimal"].as_f64().unwrap() - want).abs() < 1e-12);
    assert!(v["mac"]["hybrid"]["value"].as_f64().unwrap() <= v["mac"]["upper"].as_f64().unwrap());

    let bad = write(&dir, "bad.json", &json!({ "rho": 1.5 }));
    assert_eq!(dht(&["gauss", "--input", s(&bad)]).status.code(), Some(2));
}

#[test]
fn simulate_writes_one_row_per_blocklength() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "sim.json", &binary_doc(Some(low_rate_aux())));
    let run = || {
        dht(&["simulate", "--input", s(&input), "--n", "20,40", "--mu60", "1.5", "--rate-margin", "0.01", "--trials", "300", "--seed", "4"])
    };
    let out = run();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(out.stdout, run().stdout);
    let lines = csv_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines[0], "n,mu,trials,alpha_hat,beta_hat,exponent_hat,ci_radius,error");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("20,") && lines[2].starts_with("40,"));
}

#[test]
fn simulate_keeps_failed_points_with_their_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "sim.json", &binary_doc(Some(low_rate_aux())));
    // A wide typicality slack inflates the rates past the codebook bound.
    let out = dht(&["simulate", "--input", s(&input), "--n", "60", "--mu", "2.0", "--trials", "10"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = csv_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines.len(), 2);
    assert!(lines[1].contains("codebook"), "{}", lines[1]);
}

fn mac_problem() -> HypothesisProblem {
    let src = ax(&[("X1", 2), ("X2", 2), ("Y", 2)]);
    let p = JointPmf::from_fn(src.clone(), |i| if i[0] == i[2] && i[1] == i[2] { 0.3 } else { 1.0 / 15.0 }).unwrap();
    let q = JointPmf::uniform(src).unwrap();
    let channel = Channel::from_fn(ax(&[("W1", 2), ("W2", 2)]), ax(&[("V", 3)]), |i, o| {
        let sum = i[0] + i[1];
        if o[0] == sum {
            0.9
        } else {
            0.05
        }
    })
    .unwrap();
    HypothesisProblem::new(p, q, channel, Variant::Mac).unwrap()
}

#[test]
fn mac_emits_nine_component_rows() {
    let dir = TempDir::new().unwrap();
    let doc = json!({
        "problem": serde_json::to_value(mac_problem()).unwrap(),
        "aux": { "t": [1.0, 0.0, 0.0, 0.0], "s1": vec![[1.0]; 8], "s2": vec![[1.0]; 8], "f1": [0, 1], "f2": [0, 1] },
    });
    let input = write(&dir, "mac.json", &doc);
    let csv = dir.path().join("mac.csv");
    let out = dht(&["mac", "--input", s(&input), "--csv", s(&csv)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["components"].as_object().unwrap().len(), 9);
    let lines = csv_lines(&fs::read_to_string(&csv).unwrap());
    assert_eq!(lines[0], "component,divergence,offset,value");
    assert_eq!(lines.len(), 10);
}

fn bc_problem() -> HypothesisProblem {
    let src = ax(&[("X", 2), ("Y1", 2), ("Y2", 2)]);
    let p = JointPmf::from_fn(src.clone(), |i| if i[0] == i[1] && i[0] == i[2] { 0.35 } else { 0.05 }).unwrap();
    let q = JointPmf::from_fn(src, |i| if i[0] == 0 { 0.1 } else { 0.15 }).unwrap();
    let channel = Channel::from_fn(ax(&[("W", 2)]), ax(&[("V1", 2), ("V2", 2)]), |i, o| {
        let f = |v: usize, r: f64| if v == i[0] { 1.0 - r } else { r };
        f(o[0], 0.1) * f(o[1], 0.2)
    })
    .unwrap();
    HypothesisProblem::new(p, q, channel, Variant::Bc).unwrap()
}

#[test]
fn bc_emits_constraints_and_pareto_vertices() {
    let dir = TempDir::new().unwrap();
    // Constant quantizers cost no rate, so the region is always defined.
    let quant = json!([[1.0], [1.0]]);
    let code = json!([[1.0, 0.0], [0.0, 1.0]]);
    let doc = json!({
        "problem": serde_json::to_value(bc_problem()).unwrap(),
        "labeling": [0, 1],
        "different": { "s": [quant, quant], "t": [0.5, 0.5], "ti": [[[1.0], [1.0]], [[1.0], [1.0]]], "w": [code, code] },
    });
    let input = write(&dir, "bc.json", &doc);
    let csv = dir.path().join("bc.csv");
    let out = dht(&["bc", "--input", s(&input), "--csv", s(&csv)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!(!v["constraints"].as_array().unwrap().is_empty());
    let lines = csv_lines(&fs::read_to_string(&csv).unwrap());
    assert_eq!(lines[0], "theta1,theta2");
    assert_eq!(lines.len() - 1, v["pareto_vertices"].as_array().unwrap().len());
}
