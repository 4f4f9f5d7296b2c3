use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn permbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permbp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn approx_on_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.txt", "1\n5\n");
    let v = json(&permbp(&["approx", "--input", &m]));
    assert!((v["log_estimate"].as_f64().unwrap() - 5f64.ln()).abs() < 1e-12);
    assert_eq!(v["converged"], Value::Bool(true));
}

#[test]
fn exact_ryser_on_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.txt", "2\n1 2\n3 4\n");
    for method in ["ryser", "brute-force"] {
        let v = json(&permbp(&["exact", "--method", method, "--input", &m]));
        assert!((v["estimate"].as_f64().unwrap() - 10.0).abs() < 1e-12);
    }
}

#[test]
fn approx_emits_beliefs_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let gen = permbp(&["gen", "--n", "6", "--seed", "3", "--format", "csv"]);
    assert!(gen.status.success());
    let m = write(dir.path(), "m.csv", &String::from_utf8(gen.stdout).unwrap());
    let v = json(&permbp(&["approx", "--input", &m, "--emit-beliefs"]));
    assert_eq!(v["converged"], Value::Bool(true));
    let b = v["beliefs"].as_array().unwrap();
    assert_eq!(b.len(), 6);
    for row in b {
        let s: f64 = row
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
    assert!((v["f_bethe"].as_f64().unwrap() + v["log_estimate"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn bench_accuracy_summary() {
    let v = json(&permbp(&[
        "bench-accuracy",
        "--n",
        "8",
        "--count",
        "200",
        "--seed",
        "1",
    ]));
    assert_eq!(v["n"], 8);
    assert_eq!(v["count"], 200);
    let k = v["kendall"].as_object().unwrap();
    assert_eq!(k.len(), 4);
    for method in ["bethe", "sampling", "det", "diag"] {
        let d = k[method].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&d), "{method}: {d}");
    }
}

#[test]
fn identical_runs_are_byte_identical_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let report = dir.path().join(format!("r{run}.csv"));
        let out = permbp(&[
            "bench-accuracy",
            "--n",
            "6",
            "--count",
            "40",
            "--seed",
            "9",
            "--samples",
            "2000",
            "--no-timing",
            "--report",
            report.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push((out.stdout, std::fs::read(&report).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let m = write(dir.path(), "m.txt", "3\n1 2 3\n4 5 6\n7 8 9.5\n");
    let a = permbp(&["approx", "--input", &m, "--no-timing", "--emit-beliefs"]);
    let b = permbp(&["approx", "--input", &m, "--no-timing", "--emit-beliefs"]);
    assert_eq!(a.stdout, b.stdout);
    let a = permbp(&[
        "sample",
        "--input",
        &m,
        "--samples",
        "500",
        "--seed",
        "4",
        "--no-timing",
    ]);
    let b = permbp(&[
        "sample",
        "--input",
        &m,
        "--samples",
        "500",
        "--seed",
        "4",
        "--no-timing",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(permbp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(permbp(&["approx", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(permbp(&["--help"]).status.code(), Some(0));

    assert_eq!(
        permbp(&["approx", "--input", "/does/not/exist"])
            .status
            .code(),
        Some(2)
    );
    let ragged = write(dir.path(), "bad.txt", "2\n1 2\n3\n");
    assert_eq!(
        permbp(&["exact", "--input", &ragged]).status.code(),
        Some(2)
    );
    let negative = write(dir.path(), "neg.txt", "2\n1 -2\n3 4\n");
    assert_eq!(
        permbp(&["approx", "--input", &negative]).status.code(),
        Some(2)
    );
    let zeros = write(dir.path(), "z.txt", "2\n0 1\n1 1\n");
    assert_eq!(
        permbp(&["approx", "--input", &zeros, "--reject-zeros"])
            .status
            .code(),
        Some(2)
    );
    let big = write(dir.path(), "big.txt", &{
        let mut s = String::from("13\n");
        for _ in 0..13 {
            s.push_str(&vec!["1"; 13].join(" "));
            s.push('\n');
        }
        s
    });
    assert_eq!(
        permbp(&["exact", "--method", "brute-force", "--input", &big])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn baselines_and_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"n": 2, "rows": [[1, 2], [3, 4]]}"#,
    );
    let v = json(&permbp(&["baseline", "--method", "det", "--input", &m]));
    assert_eq!(v["sign"], -1);
    assert!((v["estimate"].as_f64().unwrap() + 2.0).abs() < 1e-12);
    let v = json(&permbp(&["baseline", "--method", "diag", "--input", &m]));
    assert!((v["estimate"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    let v = json(&permbp(&["sample", "--input", &m, "--samples", "20000"]));
    assert_eq!(v["samples_used"], 20000);
    assert!((v["estimate"].as_f64().unwrap() - 10.0).abs() < 0.5);
}

#[test]
fn kernel_and_runtime_commands() {
    let dir = tempfile::tempdir().unwrap();
    let sets = write(
        dir.path(),
        "sets.json",
        r#"{"sets": [[[0, 0], [1, 0]], [[0, 1], [1, 1]], [[0.5, 0.5], [0.2, 0.1]]]}"#,
    );
    let v = json(&permbp(&["kernel", "--input", &sets, "--sigma", "0.5"]));
    assert_eq!(v["gram"].as_array().unwrap().len(), 3);
    assert!(v["min_eigenvalue"].is_number());
    assert!(v["psd"].is_boolean());

    let report = dir.path().join("runtime.csv");
    let v = json(&permbp(&[
        "bench-runtime",
        "--n-min",
        "5",
        "--n-max",
        "15",
        "--trials",
        "2",
        "--report",
        report.to_str().unwrap(),
    ]));
    let ns: Vec<u64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["n"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, vec![5, 10, 15]);
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 4);
}

#[test]
fn gen_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = permbp(&[
        "gen",
        "--n",
        "4",
        "--seed",
        "11",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = json(&permbp(&["exact", "--input", path.to_str().unwrap()]));
    assert_eq!(v["n"], 4);
    assert!(v["log_estimate"].as_f64().unwrap().is_finite());
}
