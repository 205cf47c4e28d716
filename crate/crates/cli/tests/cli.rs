use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conehedge")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn close(a: &Value, b: f64, tol: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() <= tol
}

fn has_vertex(points: &Value, p: &[f64], tol: f64) -> bool {
    points.as_array().unwrap().iter().any(|q| q.as_array().unwrap().iter().zip(p).all(|(x, y)| close(x, *y, tol)))
}

#[test]
fn compute_one_period_digital() {
    let v = json_of(&run(&["compute", "--market", &data("one_period_market.json"), "--claim", &data("one_period_digital.json")]));
    let root = &v["nodes"][v["root"].to_string()];
    assert_eq!(root["vrep"]["points"].as_array().unwrap().len(), 2);
    assert!(has_vertex(&root["vrep"]["points"], &[0.0, 1.0], 1e-9));
    assert!(has_vertex(&root["vrep"]["points"], &[-80.0, 5.0], 1e-9));
}

#[test]
fn zero_claim_puts_origin_on_the_boundary() {
    let v = json_of(&run(&["compute", "--market", &data("one_period_market.json"), "--claim", &data("zero.json")]));
    let root = &v["nodes"]["0"];
    let b: Vec<f64> = root["hrep"]["b"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(b.iter().all(|x| *x <= 1e-12));
    assert!(b.iter().any(|x| x.abs() <= 1e-12));
}

#[test]
fn malformed_input_exits_one_with_pointer() {
    let out = run(&["compute", "--market", &data("malformed_market.json"), "--claim", &data("one_period_digital.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nodes/0/bidask/0/1"));
}

#[test]
fn arbitrage_exits_two() {
    let out = run(&["compute", "--market", &data("crossed_market.json"), "--claim", &data("zero.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn six_step_call_prices() {
    let v = json_of(&run(&["price", "--market", &data("call_lattice_6.json"), "--claim", &data("call_80.json"), "--asset", "0"]));
    let rows = v["prices"].as_array().unwrap();
    let ask = rows.iter().find(|r| r["side"] == "ask").unwrap();
    let bid = rows.iter().find(|r| r["side"] == "bid").unwrap();
    assert!(close(&ask["cash"], 27.854, 1e-3), "{ask}");
    assert!(close(&bid["cash"], 27.552, 1e-3), "{bid}");
}

#[test]
fn price_from_stored_sets_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let shp = dir.path().join("shp.json");
    let shp = shp.to_str().unwrap();
    let out = run(&["compute", "--market", &data("call_lattice_6.json"), "--claim", &data("call_80.json"), "-o", shp]);
    assert!(out.status.success());
    let v = json_of(&run(&["price", "--shp", shp, "--side", "a"]));
    assert!(close(&v["prices"][0]["cash"], 27.854, 1e-3));
    assert_eq!(run(&["price", "--shp", shp, "--side", "b"]).status.code(), Some(1));
    let csv = run(&["price", "--market", &data("call_lattice_6.json"), "--claim", &data("call_80.json"), "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("side,units,cash\nask,"));
}

fn strategy_total(extra: &[&str]) -> f64 {
    let mut args = vec!["strategy", "--market", "", "--claim", "", "--coords", "0,0;1,0;2,1;2,2;3,3", "--vertex", "1"];
    let market = data("two_stock_lattice.json");
    let claim = data("outperformance_47.json");
    args[2] = &market;
    args[4] = &claim;
    args.extend_from_slice(extra);
    json_of(&run(&args))["total_alpha"].as_f64().unwrap()
}

#[test]
fn strategy_modes_on_two_stock_lattice() {
    assert!((strategy_total(&["--mode", "max-cash"]) - 2.882).abs() < 1e-3);
    assert!((strategy_total(&["--mode", "min-trade"]) - 6.143).abs() < 1e-3);
    let script = data("mixed_script.json");
    assert!((strategy_total(&["--mode", "script", "--script", &script]) - 3.006).abs() < 1e-3);
}

#[test]
fn outputs_are_byte_identical() {
    let args = ["compute", "--market", &data("two_stock_lattice.json"), "--claim", &data("outperformance_47.json")];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_conehedge")).args(args).env("CONEHEDGE_THREADS", "1").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn vector_problem_solution() {
    let v = json_of(&run(&["vop", "--problem", &data("two_objective_problem.json")]));
    assert!(has_vertex(&v["upper_image"]["vrep"]["points"], &[0.0, 4.0], 1e-9));
    assert!(has_vertex(&v["upper_image"]["vrep"]["points"], &[6.0, 6.0], 1e-9));
}

#[test]
fn plots_are_svg() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    assert!(run(&["compute", "--market", &data("two_stock_lattice.json"), "--claim", &data("outperformance_47.json"), "-o", &p("shp.json")]).status.success());
    assert!(run(&["plot", "set", "--shp", &p("shp.json"), "--axes", "1,2", "-o", &p("set.svg")]).status.success());
    let set = std::fs::read_to_string(p("set.svg")).unwrap();
    assert!(set.starts_with("<svg") && set.matches("<circle").count() == 2);
    let log = p("log.json");
    let out = run(&["strategy", "--market", &data("two_stock_lattice.json"), "--claim", &data("outperformance_47.json"), "--path", "0,3,12,24,48", "--vertex", "1", "-o", &log]);
    assert!(out.status.success());
    assert!(run(&["plot", "frontier", "--log", &log, "--step", "2", "-o", &p("f.svg")]).status.success());
    assert!(std::fs::read_to_string(p("f.svg")).unwrap().contains("<polyline"));
}
