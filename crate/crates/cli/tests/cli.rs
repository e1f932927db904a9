use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rkmeans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkmeans"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const TRI: &str = "0,1,9\n1,0,1\n9,1,0\n";
const LINE4: &str = "0\n1\n10\n11\n";

#[test]
fn cluster_points_on_a_line() {
    let dir = TempDir::new().unwrap();
    let points = fixture(&dir, "line4.csv", LINE4);
    let labels = dir.path().join("labels.csv");
    let report = dir.path().join("report.json");
    let out = rkmeans(&[
        "cluster", "--points", s(&points), "--clusters", "2", "--restarts", "10",
        "--labels-out", s(&labels), "--report-out", s(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("n=4 N=2 objective=1 beta=0 iters="));
    let text = fs::read_to_string(&labels).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "point,cluster");
    let cluster = |r: &str| r.split(',').nth(1).unwrap().to_string();
    assert_eq!(cluster(rows[1]), cluster(rows[2]));
    assert_eq!(cluster(rows[3]), cluster(rows[4]));
    assert_ne!(cluster(rows[1]), cluster(rows[3]));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["objective"], 1.0);
    assert_eq!(doc["labels_file"], s(&labels));
    assert_eq!(doc["converged"], true);
}

#[test]
fn eager_cluster_reports_beta_star() {
    let dir = TempDir::new().unwrap();
    let tri = fixture(&dir, "tri.csv", TRI);
    let report = dir.path().join("r.json");
    let out = rkmeans(&[
        "cluster", "--matrix", s(&tri), "--clusters", "2", "--beta-mode", "eager",
        "--report-out", s(&report), "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((doc["beta"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-6);
}

#[test]
fn summary_line_format() {
    let dir = TempDir::new().unwrap();
    let tri = fixture(&dir, "tri.csv", TRI);
    let out = rkmeans(&["cluster", "--matrix", s(&tri), "--clusters", "1", "--beta-mode", "off"]);
    let line = stdout(&out);
    let fields: Vec<&str> = line.trim().split(' ').collect();
    let keys: Vec<&str> = fields.iter().map(|f| f.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["n", "N", "objective", "beta", "iters", "converged"]);
    // One cluster: grand sum 22 over 2n = 6.
    assert_eq!(fields[2], "objective=3.6666666666666665");
}

#[test]
fn iteration_cap_in_report() {
    let dir = TempDir::new().unwrap();
    let pts: String = (0..60).map(|i| format!("{}\n", (i * 37) % 61)).collect();
    let points = fixture(&dir, "p.csv", &pts);
    let report = dir.path().join("r.json");
    let out = rkmeans(&[
        "cluster", "--points", s(&points), "--clusters", "5", "--init", "random",
        "--max-iter", "1", "--report-out", s(&report),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["iterations"], 1);
    assert_eq!(doc["converged"], false);
}

#[test]
fn check_verdicts() {
    let dir = TempDir::new().unwrap();
    let tri = fixture(&dir, "tri.csv", TRI);
    let out = rkmeans(&["check", "--matrix", s(&tri)]);
    assert_eq!(out.status.code(), Some(1));
    let last = stdout(&out).lines().last().unwrap().to_string();
    let beta: f64 = last.strip_prefix("euclidean=false beta_star=").unwrap().parse().unwrap();
    assert!((beta - 1.666667).abs() < 1e-6);

    let points = fixture(&dir, "line4.csv", LINE4);
    let out = rkmeans(&["check", "--points", s(&points)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().last().unwrap(), "euclidean=true beta_star=0");

    let one = fixture(&dir, "one.csv", "0\n");
    let out = rkmeans(&["check", "--matrix", s(&one), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "euclidean=true beta_star=0\n");
}

#[test]
fn spread_outputs() {
    let dir = TempDir::new().unwrap();
    let tri = fixture(&dir, "tri.csv", TRI);
    let target = dir.path().join("fixed.csv");
    let out = rkmeans(&["spread", "--matrix", s(&tri), "--matrix-out", s(&target)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("beta=1.66666666666666"));
    let text = fs::read_to_string(&target).unwrap();
    let first: Vec<f64> = text.lines().next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[1] - 8.0 / 3.0).abs() < 1e-12);
    assert!((first[2] - 32.0 / 3.0).abs() < 1e-12);

    let out = rkmeans(&["spread", "--matrix", s(&tri), "--beta", "0"]);
    assert_eq!(stdout(&out), TRI);

    let points = fixture(&dir, "line4.csv", LINE4);
    let out = rkmeans(&["spread", "--points", s(&points), "--quiet"]);
    assert_eq!(stdout(&out), "0,1,100,121\n1,0,81,100\n100,81,0,1\n121,100,1,0\n");
}

#[test]
fn named_and_tab_separated_input() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir, "named.tsv", "a\tb\tc\n0\t1\t9\n1\t0\t1\n9\t1\t0\n");
    let labels = dir.path().join("l.csv");
    let out = rkmeans(&[
        "cluster", "--matrix", s(&m), "--clusters", "3", "--labels-out", s(&labels),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&labels).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["a", "b", "c"]);

    let lin = fixture(&dir, "lin.csv", "0,3\n3,0\n");
    let out = rkmeans(&["spread", "--matrix", s(&lin), "--square-input", "--beta", "0", "--quiet"]);
    assert_eq!(stdout(&out), "0,9\n9,0\n");
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let dir = TempDir::new().unwrap();
    let tri = fixture(&dir, "tri.csv", TRI);
    let points = fixture(&dir, "p.csv", LINE4);
    let ragged = fixture(&dir, "ragged.csv", "0,1\n1\n");
    let asym = fixture(&dir, "asym.csv", "0,1\n2,0\n");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["cluster", "--matrix", s(&tri), "--points", s(&points), "--clusters", "2"], 2),
        (vec!["cluster", "--matrix", s(&tri)], 2),
        (vec!["cluster", "--clusters", "2"], 2),
        (vec!["cluster", "--matrix", s(&tri), "--clusters", "0"], 2),
        (vec!["cluster", "--points", s(&points), "--square-input", "--clusters", "2"], 2),
        (vec!["bogus"], 2),
        (vec!["cluster", "--matrix", "/nonexistent.csv", "--clusters", "2"], 3),
        (vec!["cluster", "--matrix", s(&ragged), "--clusters", "1"], 3),
        (vec!["check", "--matrix", s(&asym)], 3),
        (vec!["cluster", "--matrix", s(&tri), "--clusters", "4"], 4),
        (vec!["spread", "--matrix", s(&tri), "--beta", "-1"], 2),
    ];
    for (args, code) in cases {
        let out = rkmeans(&args);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error:"), "{args:?}: {err}");
    }
}

#[test]
fn ragged_rows_name_the_line() {
    let dir = TempDir::new().unwrap();
    let ragged = fixture(&dir, "ragged.csv", "0,1,2\n1,0\n2,1,0\n");
    let out = rkmeans(&["check", "--matrix", s(&ragged)]);
    assert!(stderr(&out).contains("ragged.csv:2:"), "{}", stderr(&out));
}

#[test]
fn in_process_entry_point() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = relational_kmeans_cli::run(["rkmeans", "--help"], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().contains("cluster"));
}

#[test]
fn number_formatting() {
    use relational_kmeans_cli::format_number;
    assert_eq!(format_number(0.0), "0");
    assert_eq!(format_number(1.0), "1");
    assert_eq!(format_number(5.0 / 3.0), "1.6666666666666667");
    assert_eq!(format_number(1.25e-14), "1.25e-14");
    assert_eq!(format_number(-2.5e20), "-2.5e20");
}
