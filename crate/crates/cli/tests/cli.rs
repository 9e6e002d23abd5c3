use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn covloc(args: &[&str]) -> Output {
    covloc_env(args, &[])
}

fn covloc_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_covloc"));
    cmd.args(args).env_remove("COVLOC_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn covloc")
}

fn ok(args: &[&str]) -> String {
    let out = covloc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let mut rows = vec![header];
    rows.extend(r.records().map(Result::unwrap));
    rows
}

fn column(rows: &[csv::StringRecord], name: &str) -> Vec<String> {
    let idx = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"));
    rows[1..].iter().map(|r| r[idx].to_string()).collect()
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("seconds");
            map.remove("secs");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn generate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        ok(&["generate", "--n", "5", "--T", "3", "--S", "3", "--seed", "42", "--out", p(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn seed_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    ok(&["generate", "--n", "4", "--T", "2", "--S", "2", "--seed", "42", "--out", p(&a)]);
    let out = covloc_env(
        &["generate", "--n", "4", "--T", "2", "--S", "2", "--seed", "1", "--out", p(&b)],
        &[("COVLOC_SEED", "42")],
    );
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn solve_then_report_populates_columns() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.csv");
    let summary = dir.path().join("summary.csv");
    for seed in ["1", "2"] {
        ok(&[
            "solve", "--n", "5", "--T", "3", "--S", "3", "--seed", seed, "--variant", "1.iii", "--out", p(&runs),
        ]);
    }
    let rows = records(&runs);
    assert_eq!(rows.len(), 3, "one header and two appended rows");
    for name in ["hash", "lb", "ub", "gap_lb_ub", "gap_lp_lb", "iters", "secs"] {
        for v in column(&rows, name) {
            assert!(!v.is_empty(), "{name} empty");
        }
    }
    ok(&["report", p(&runs), "--out", p(&summary)]);
    let rows = records(&summary);
    assert_eq!(rows.len(), 2);
    for name in ["lb", "ub", "gap_lb_ub", "gap_lp_lb", "iters", "secs"] {
        let v: f64 = column(&rows, name)[0].parse().unwrap();
        assert!(v.is_finite(), "{name}");
    }
    assert_eq!(column(&rows, "runs")[0], "2");
    assert_eq!(column(&rows, "instances")[0], "2");
}

#[test]
fn exact_and_solve_outputs_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["3", "4", "5"] {
        let inst = dir.path().join(format!("i{seed}.inst.json"));
        let exact = dir.path().join(format!("i{seed}.exact.json"));
        let runs = dir.path().join(format!("i{seed}.csv"));
        ok(&["generate", "--n", "3", "--T", "2", "--S", "2", "--seed", seed, "--out", p(&inst)]);
        ok(&["exact", p(&inst), "--out", p(&exact)]);
        ok(&["solve", p(&inst), "--variant", "all", "--jobs", "2", "--out", p(&runs)]);
        let ex: Value = serde_json::from_str(&fs::read_to_string(&exact).unwrap()).unwrap();
        let opt = ex["opt"].as_f64().unwrap();
        assert!(ex["value"]["evpi"].as_f64().unwrap() >= -1e-9);
        assert!(ex["value"]["vms"].as_f64().unwrap() >= -1e-9);
        let rows = records(&runs);
        assert_eq!(rows.len(), 9);
        for h in column(&rows, "hash") {
            assert_eq!(h, ex["hash"].as_str().unwrap());
        }
        let lbs = column(&rows, "lb");
        let ubs = column(&rows, "ub");
        for (lb, ub) in lbs.iter().zip(&ubs) {
            let (lb, ub): (f64, f64) = (lb.parse().unwrap(), ub.parse().unwrap());
            assert!(lb - 1e-7 <= opt && opt <= ub + 1e-7, "lb {lb} opt {opt} ub {ub}");
        }
        // The exact output doubles as a solution file.
        let eval: Value = serde_json::from_str(&ok(&["evaluate", p(&inst), "--solution", p(&exact)])).unwrap();
        let scored = eval["evaluation"]["objective"].as_f64().unwrap();
        assert!((scored - opt).abs() < 1e-9);
    }
}

#[test]
fn json_reports_and_exports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("x.inst.json");
    ok(&["generate", "--n", "5", "--T", "2", "--S", "2", "--seed", "11", "--out", p(&inst)]);
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let json = dir.path().join(format!("{tag}.json"));
        let mps = dir.path().join(format!("{tag}.mps"));
        let lp = dir.path().join(format!("{tag}.lp"));
        ok(&["solve", p(&inst), "--variant", "2.ii,1.iv", "--format", "json", "--out", p(&json)]);
        ok(&["export", p(&inst), "--format", "mps", "--out", p(&mps)]);
        ok(&["export", p(&inst), "--format", "lp", "--out", p(&lp)]);
        let mut v: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        strip_timing(&mut v);
        outputs.push((v, fs::read(&mps).unwrap(), fs::read(&lp).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(String::from_utf8_lossy(&outputs[0].1).contains("ENDATA"));
}

#[test]
fn reduce_compiles_a_covering_case() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("cov.json");
    let inst = dir.path().join("cov.inst.json");
    let covers = [[true, false], [false, true], [true, true]];
    let cost = [1.0, 1.0, 1.5];
    let doc = serde_json::json!({
        "kind": "COV",
        "covers": covers,
        "operate_cost": cost,
        "location_cap": [1, 1, 1],
        "period_cap": 2,
        "threshold": [1, 1],
        "surplus_cost": [[0.0], [0.0]],
    });
    fs::write(&case, doc.to_string()).unwrap();
    let meta: Value = serde_json::from_str(&ok(&["reduce", p(&case), "--out", p(&inst)])).unwrap();
    let ex: Value = serde_json::from_str(&ok(&["exact", p(&inst), "--opt-only"])).unwrap();
    let value = ex["opt"].as_f64().unwrap() + meta["offset"].as_f64().unwrap();
    // Cheapest set of at most two locations covering both points.
    let mut best = f64::INFINITY;
    for mask in 1u32..8 {
        let chosen: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
        let covered = (0..2).all(|j| chosen.iter().any(|&i| covers[i][j]));
        if covered && chosen.len() <= 2 {
            best = best.min(chosen.iter().map(|&i| cost[i]).sum());
        }
    }
    assert!((value - best).abs() < 1e-9, "{value} vs {best}");
}

#[test]
fn errors_are_single_json_lines() {
    let cases: [&[&str]; 4] = [
        &["exact", "/nonexistent/instance.json"],
        &["solve", "--variant", "3.i", "--n", "3", "--T", "1", "--S", "1"],
        &["solve"],
        &["export", "/nonexistent/instance.json", "--format", "csv"],
    ];
    for args in cases {
        let out = covloc(args);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: Value = serde_json::from_str(err.trim_end()).unwrap();
        assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn exact_budget_points_to_export() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("big.inst.json");
    ok(&["generate", "--n", "5", "--T", "3", "--S", "2", "--seed", "1", "--out", p(&inst)]);
    let out = covloc(&["exact", p(&inst), "--budget", "10"]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["message"].as_str().unwrap().contains("export"));
}
