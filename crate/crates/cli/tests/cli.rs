use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scc(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_scc"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SCC_THREADS", t),
        None => cmd.env_remove("SCC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = scc(args, None);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn simulate(dir: &Path, setting: &str, n: &str, p: &str) -> PathBuf {
    ok(&["simulate", "--setting", setting, "--seed", "3", "--n", n, "--p", p, "--out", s(dir)]);
    dir.join("data.csv")
}

#[test]
fn simulate_writes_expected_shapes() {
    let tmp = TempDir::new().unwrap();
    ok(&["simulate", "--setting", "1", "--seed", "7", "--out", s(tmp.path())]);
    let data = fs::read_to_string(tmp.path().join("data.csv")).unwrap();
    let header = data.lines().next().unwrap();
    assert!(header.starts_with("f1,f2,") && header.ends_with(",f150"));
    assert_eq!(data.lines().count(), 61);
    assert!(!data.contains('\r'));
    assert_eq!(fs::read_to_string(tmp.path().join("labels.csv")).unwrap().lines().count(), 60);
    let informative = fs::read_to_string(tmp.path().join("informative.csv")).unwrap();
    assert_eq!(informative.lines().collect::<Vec<_>>(), (1..=20).map(|j| j.to_string()).collect::<Vec<_>>());

    ok(&["simulate", "--setting", "5", "--seed", "7", "--out", s(&tmp.path().join("moons"))]);
    let rows = read_csv(&tmp.path().join("moons/data.csv"));
    assert_eq!((rows.len(), rows[0].len()), (100, 40));
}

#[test]
fn unknown_setting_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(scc(&["simulate", "--setting", "9", "--out", s(tmp.path())], None).status.code(), Some(2));
}

#[test]
fn floats_round_trip_exactly() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "1", "12", "25");
    let text = fs::read_to_string(&data).unwrap();
    let first = text.lines().nth(1).unwrap().split(',').next().unwrap();
    let v: f64 = first.parse().unwrap();
    assert_eq!(format!("{v:.16e}"), first);
}

#[test]
fn zero_penalty_returns_centered_input() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "3", "10", "22");
    let out = tmp.path().join("fit");
    ok(&["fit", "--input", s(&data), "--gamma1", "0", "--gamma2", "0", "--out", s(&out)]);
    let x = read_csv(&data);
    let a = read_csv(&out.join("centers.csv"));
    for j in 0..22 {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / 10.0;
        for i in 0..10 {
            assert!((a[i][j] - (x[i][j] - mean)).abs() < 1e-8);
        }
    }
    assert_eq!(fs::read_to_string(out.join("features.csv")).unwrap().lines().count(), 22);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], true);
    assert_eq!(diag["num_clusters"], 10);

    let raw_out = tmp.path().join("raw");
    ok(&["fit", "--input", s(&data), "--gamma1", "0", "--gamma2", "0", "--emit-raw-centers", "--out", s(&raw_out)]);
    let raw = read_csv(&raw_out.join("centers.csv"));
    for i in 0..10 {
        for j in 0..22 {
            assert!((raw[i][j] - x[i][j]).abs() < 1e-8);
        }
    }
}

#[test]
fn solvers_agree_on_a_small_file() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "1", "12", "25");
    let mut objectives = Vec::new();
    for alg in ["sama", "sadmm"] {
        let out = tmp.path().join(alg);
        ok(&[
            "fit", "--input", s(&data), "--gamma1", "2", "--gamma2", "0.5", "--algorithm", alg, "--tol", "1e-10",
            "--max-iter", "200000", "--out", s(&out),
        ]);
        let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
        objectives.push(diag["objective"].as_f64().unwrap());
    }
    assert!((objectives[0] - objectives[1]).abs() <= 1e-4 * objectives[0].abs(), "{objectives:?}");
}

#[test]
fn malformed_csv_reports_line_number() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "f1,f2\n1,2\n3,oops\n").unwrap();
    let out = scc(&["fit", "--input", s(&bad), "--gamma1", "1", "--gamma2", "0"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&bad, "1,2\n3\n").unwrap();
    let out = scc(&["fit", "--input", s(&bad), "--gamma1", "1", "--gamma2", "0"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn non_convergence_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "1", "12", "25");
    let out = tmp.path().join("fit");
    let res = scc(
        &["fit", "--input", s(&data), "--gamma1", "5", "--gamma2", "0.1", "--max-iter", "1", "--tol", "1e-14", "--out", s(&out)],
        None,
    );
    assert_eq!(res.status.code(), Some(3));
    assert!(out.join("centers.csv").exists());
}

#[test]
fn path_layout_and_endpoints() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "3", "10", "22");
    let out = tmp.path().join("path");
    let res = scc(&["path", "--input", s(&data), "--points", "4", "--max-iter", "100000", "--out", s(&out)], None);
    assert!(matches!(res.status.code(), Some(0 | 3)));
    let long = read_csv(&out.join("path.csv"));
    assert_eq!(long.len(), 4 * 10 * 22);
    let counts = fs::read_to_string(out.join("clusters.csv")).unwrap();
    let k: Vec<&str> = counts.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(k.first(), Some(&"10"));
    assert_eq!(k.last(), Some(&"1"));

    // a single grid point reproduces `fit`
    let single = tmp.path().join("single");
    ok(&["path", "--input", s(&data), "--gamma1", "0.3", "--gamma2", "0.2", "--out", s(&single)]);
    let fit = tmp.path().join("fit");
    ok(&["fit", "--input", s(&data), "--gamma1", "0.3", "--gamma2", "0.2", "--out", s(&fit)]);
    let a = read_csv(&fit.join("centers.csv"));
    for row in read_csv(&single.join("path.csv")) {
        assert_eq!(row[3], a[row[1] as usize - 1][row[2] as usize - 1]);
    }
}

#[test]
fn tune_single_point_grid_selects_it() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), "1", "12", "25");
    let grid = tmp.path().join("grid.json");
    fs::write(&grid, r#"{"gamma1": [0.7], "gamma2": [0.05]}"#).unwrap();
    let out = tmp.path().join("tune");
    ok(&["tune", "--input", s(&data), "--grid", s(&grid), "--bootstrap", "4", "--seed", "1", "--out", s(&out)]);
    let sel: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("selected.json")).unwrap()).unwrap();
    assert_eq!(sel["gamma1"], 0.7);
    assert_eq!(sel["gamma2"], 0.05);
    assert_eq!(fs::read_to_string(out.join("stability.csv")).unwrap().lines().count(), 2);

    fs::write(&grid, "{not json").unwrap();
    let res = scc(&["tune", "--input", s(&data), "--grid", s(&grid), "--out", s(&out)], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn evaluate_examples() {
    let tmp = TempDir::new().unwrap();
    let write = |name: &str, v: &[usize]| {
        let p = tmp.path().join(name);
        fs::write(&p, v.iter().map(|x| format!("{x}\n")).collect::<String>()).unwrap();
        p
    };
    let truth = write("truth.csv", &[1, 1, 2, 2, 3]);
    let out = ok(&["evaluate", "--predicted", s(&truth), "--truth", s(&truth)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rand"], 1.0);

    // singletons vs one cluster: no pair agrees
    let singles = write("singles.csv", &[1, 2, 3, 4]);
    let constant = write("constant.csv", &[1, 1, 1, 1]);
    let out = ok(&["evaluate", "--predicted", s(&singles), "--truth", s(&constant)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rand"], 0.0);

    let all = write("all.csv", &[1, 2, 3, 4, 5, 6]);
    let informative = write("inf.csv", &[1, 2]);
    let out = ok(&[
        "evaluate", "--predicted", s(&truth), "--truth", s(&truth), "--selected", s(&all), "--informative", s(&informative),
        "--p", "6",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["fnr"].as_f64(), v["fpr"].as_f64()), (Some(0.0), Some(1.0)));

    let short = write("short.csv", &[1, 2]);
    assert_eq!(scc(&["evaluate", "--predicted", s(&short), "--truth", s(&truth)], None).status.code(), Some(2));
}

#[test]
fn benchmark_writes_one_row_per_method() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("table.csv");
    ok(&["benchmark", "--setting", "1", "--reps", "1", "--methods", "kmeans", "--seed", "2", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("method,reps,rand_mean"));
    assert!(lines[1].starts_with("kmeans,1,"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let res = scc(&["simulate", "--setting", "1", "--out", s(tmp.path())], Some("zero"));
    assert_eq!(res.status.code(), Some(2));
}
