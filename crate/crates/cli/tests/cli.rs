use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmm"))
        .args(args)
        .output()
        .expect("pmm binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ar1_gamma.csv")
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", stderr(o));
    serde_json::from_str(&stdout(o)).expect("report is JSON")
}

#[test]
fn exact_line_ols() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "line.csv", "x,y\n0,1\n1,3\n2,5\n");
    let r = json(&pmm(&["fit", "--input", s(&f), "--column", "y", "--design", "x", "--method", "ols"]));
    let coef: Vec<f64> = r["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["estimate"].as_f64().unwrap())
        .collect();
    assert!((coef[0] - 1.0).abs() < 1e-12 && (coef[1] - 2.0).abs() < 1e-12, "{coef:?}");
    assert_eq!(r["method"], "ols");
}

#[test]
fn random_walk_forecasts_repeat_last_value() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rw.csv", "y\n1\n2.5\n2\n3.5\n3\n4\n5.5\n5\n6\n7.5\n7\n8\n");
    let r = json(&pmm(&[
        "fit", "--input", s(&f), "--column", "y", "--order", "0,1,0", "--method", "css",
        "--horizon", "3",
    ]));
    let fc: Vec<f64> = r["forecasts"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(fc, vec![8.0, 8.0, 8.0]);
}

#[test]
fn auto_fit_prints_transcript() {
    let o = pmm(&["fit", "--input", s(&sample()), "--column", "y", "--method", "auto"]);
    let r = json(&o);
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 3, "{err}");
    assert!(lines[0].starts_with("n = "));
    assert!(lines[1].contains("g2(PMM2) = "));
    assert!(lines[2].starts_with("  >>> ") && lines[2].ends_with("Use PMM2."));
    assert_eq!(r["dispatch"]["method"], "PMM2");
    assert_eq!(r["method"], "pmm2");
}

#[test]
fn dispatch_on_skewed_residuals() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("e.csv");
    let sim = pmm(&[
        "simulate", "--order", "0,0,0", "--family", "gamma:2,1", "--n", "400", "--seed", "5",
        "--name", "resid", "--output", s(&out),
    ]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let report = dir.path().join("d.json");
    let o = pmm(&["dispatch", "--input", s(&out), "--column", "resid", "--output", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.trim_end().ends_with("PMM2."), "{text}");
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["decision"]["method"], "PMM2");
}

#[test]
fn white_noise_simulation_round_trips() {
    let dir = TempDir::new().unwrap();
    let text = "e\n0.5\n-1.25\n3\n0.125\n1e-3\n";
    let f = write(&dir, "innov.csv", text);
    let o = pmm(&["simulate", "--order", "0,0,0", "--innovations", s(&f), "--name", "e"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let back: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(back, vec![0.5, -1.25, 3.0, 0.125, 1e-3]);
}

#[test]
fn monte_carlo_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, jobs) in [(&a, "1"), (&b, "3")] {
        let o = pmm(&["mc", "--n-sim", "50", "--seed", "11", "--jobs", jobs, "--output", s(path)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("label,method,parameter,"));
    // Three families, three methods, two coefficients.
    assert_eq!(text.lines().count(), 1 + 3 * 3 * 2);
}

#[test]
fn grid_writes_long_csv() {
    let o = pmm(&["grid", "--grid-gamma3", "0,1.5", "--grid-n", "60,80", "--n-sim", "50", "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gamma3,n,g2_hat,g2_theory");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,60,"));
}

#[test]
fn bootstrap_is_seed_deterministic() {
    let run = |seed: &str| {
        stdout(&pmm(&[
            "bootstrap", "--input", s(&sample()), "--column", "y", "--order", "1,0,0",
            "--method", "pmm2", "--B", "60", "--seed", seed,
        ]))
    };
    let (a, b, c) = (run("3"), run("3"), run("4"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["kind"], "block");
    assert_eq!(r["block_length"], 6);
}

#[test]
fn reports_carry_schema_version() {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json"))
            .unwrap(),
    )
    .unwrap();
    let version = &schema["properties"]["schema_version"]["const"];
    let r = json(&pmm(&["fit", "--input", s(&sample()), "--column", "y", "--order", "1,0,0", "--method", "css"]));
    assert_eq!(&r["schema_version"], version);
    assert_eq!(r["command"], "fit");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = write(&dir, "m.csv", "x,y\n0,1\n1,\n2,5\n");
    let o = pmm(&["fit", "--input", s(&missing), "--column", "y", "--design", "x"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 2, column 'y'"), "{}", stderr(&o));

    let text = write(&dir, "t.csv", "y\n1\nfoo\n");
    let o = pmm(&["fit", "--input", s(&text), "--column", "y"]);
    assert_eq!(o.status.code(), Some(3));

    let short = write(&dir, "s.csv", "y\n1\n2\n3\n");
    let o = pmm(&["fit", "--input", s(&short), "--column", "y", "--order", "1,0,0", "--method", "pmm2"]);
    assert_eq!(o.status.code(), Some(3));

    let o = pmm(&["fit", "--input", s(&short), "--column", "y", "--order", "1,0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pmm(&["fit", "--input", s(&short), "--column", "nope"]);
    assert_eq!(o.status.code(), Some(3));
    let o = pmm(&["mc", "--n-sim", "10"]);
    assert_eq!(o.status.code(), Some(2));

    // Constant residuals: PMM2 has no moments to work with.
    let flat = write(&dir, "f.csv", "y\n2\n2\n2\n2\n2\n2\n2\n2\n2\n2\n");
    let o = pmm(&["dispatch", "--input", s(&flat), "--column", "y"]);
    assert_eq!(o.status.code(), Some(4));
}
