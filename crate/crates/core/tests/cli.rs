use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_riskplan");

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tanks = fixture("tanks.scn");
    let o = run(&["plan", "--scenario", &tanks, "--seed", "7", "--out", p(&d.join("plans"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut logs = Vec::new();
    for id in ["P1", "P2"] {
        let plan = d.join("plans").join(format!("{id}.plan.json"));
        assert_eq!(code(&run(&["refine", "--scenario", &tanks, "--plan", p(&plan), "--out", p(&d.join("traj"))])), 0);
        let traj = d.join("traj").join(format!("{id}.trajectory.json"));
        let log = d.join(format!("{id}.jsonl"));
        let o = run(&["simulate", "--scenario", &tanks, "--trajectory", p(&traj), "--episodes", "5", "--seed", "3", "--out", p(&log)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        logs.push(log);
    }
    let report = d.join("report.json");
    let mut args = vec!["assess", "--out", p(&report), "--logs"];
    args.extend(logs.iter().map(|l| p(l)));
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("selected:"));
    assert_eq!(code(&run(&["select", "--report", p(&report)])), 0);
    assert_eq!(code(&run(&["plot", "--report", p(&report), "--out", p(&d.join("plot"))])), 0);
    assert!(d.join("plot/boxplot.svg").exists());
}

#[test]
fn mapping_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tanks = fixture("tanks.scn");
    assert_eq!(code(&run(&["map", "--scenario", &tanks, "--seed", "2", "--out", p(&d.join("map"))])), 0);
    let out = d.join("mapped.scn");
    let o = run(&["gen-problem", "--scenario", &tanks, "--grid", p(&d.join("map/grid.json")), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(riskplan::parse_scenario(&text).is_ok());
}

#[test]
fn pipeline_and_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("tanks.json");
    let out = dir.path().join("run");
    let o = run(&["pipeline", "--config", &cfg, "--seed", "7", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.csv").exists());
    assert_eq!(code(&run(&["pipeline", "--config", &cfg])), 2);
    assert_eq!(code(&run(&["simulate", "--scenario", "x", "--trajectory", "y", "--out", "z"])), 2);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.scn");
    std::fs::write(&bad, "WAYPOINT a pos=0,0\nMISSION start=a final=nowhere\n").unwrap();
    let o = run(&["plan", "--scenario", p(&bad), "--out", p(&d.join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&run(&["plan", "--scenario", p(&d.join("missing.scn")), "--out", p(&d.join("o"))])), 2);
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"scenario": "x.scn", "no_such_field": 1}"#).unwrap();
    assert_eq!(code(&run(&["pipeline", "--config", p(&cfg), "--seed", "1"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn scaling_needs_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let empty = d.join("empty.json");
    std::fs::write(&empty, r#"{"depths": [], "criticals": []}"#).unwrap();
    assert_eq!(code(&run(&["scaling", "--config", p(&empty), "--seed", "1", "--out", p(&d.join("a"))])), 2);
    assert_eq!(code(&run(&["scaling", "--depths", "3,4", "--criticals", "3", "--out", p(&d.join("b"))])), 2);
    let o = run(&["scaling", "--depths", "3,4", "--criticals", "3", "--seed", "1", "--out", p(&d.join("c"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("c/scaling.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 2);
}
