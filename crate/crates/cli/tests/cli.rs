use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_riskwork"));
    cmd.env_remove("RISKWORK_TOLERANCE_PROFILE");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("riskwork-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn assert_single_line_error(out: &Output, code: &str) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with(&format!("error: {code}: ")), "stderr: {err}");
}

/// Splits a CSV line, honouring double-quoted fields.
fn fields(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            _ => out.last_mut().unwrap().push(c),
        }
    }
    out
}

/// Qubit with ground population `p`: swapping the levels gives
/// `(1 - p e^{rε} - (1-p) e^{-rε}) / r`, doing nothing gives 0.
fn qubit_values(p: f64, r: f64) -> (f64, f64) {
    let swap = if r == 0.0 {
        1.0 - 2.0 * p
    } else {
        (1.0 - p * r.exp() - (1.0 - p) * (-r).exp()) / r
    };
    (0.0, swap)
}

#[test]
fn phase_d2_matches_golden_and_closed_form() {
    let args = ["phase-d2", "--p-min", "0.1", "--p-max", "0.9", "--r-min", "-2", "--r-max", "2", "--grid", "5"];
    let csv = stdout(&run(&args));
    let golden = include_str!("golden/phase_d2_5x5.csv");
    assert_eq!(csv, golden);
    assert_eq!(csv, stdout(&run(&args)));

    for line in csv.lines().skip(1) {
        let f = fields(line);
        let p: f64 = f[0].parse().unwrap();
        let r: f64 = f[1].parse().unwrap();
        let utility: f64 = f[3].parse().unwrap();
        let (id, swap) = qubit_values(p, r);
        let expected_label = if swap > id { "(2,1)" } else { "(1,2)" };
        assert_eq!(f[2], expected_label, "p = {p}, r = {r}");
        assert!((utility - swap.max(id)).abs() < 1e-12);
        let r_star = ((1.0 - p) / p).ln();
        if (r - r_star).abs() > 1e-9 {
            assert_eq!(f[2] == "(2,1)", r < r_star);
        }
    }
}

#[test]
fn phase_d3_writes_both_tables() {
    let map = scratch("map.csv", "");
    let freq = scratch("freq.csv", "");
    let out = run(&[
        "phase-d3",
        "--grid",
        "10",
        "--r",
        "0,-20,20",
        "--out",
        map.to_str().unwrap(),
        "--freq-out",
        freq.to_str().unwrap(),
    ]);
    assert!(stdout(&out).is_empty());
    let map = fs::read_to_string(map).unwrap();
    assert!(map.contains(
        "0.0000000000000000e0,1.0000000000000001e-1,2.9999999999999999e-1,5.9999999999999998e-1,\"(3,2,1)\""
    ));
    let freq = fs::read_to_string(freq).unwrap();
    assert!(freq.contains("2.0000000000000000e1,\"(1,2,3)\",1.0000000000000000e0"));
}

#[test]
fn optimize_incoherent_and_coherent() {
    let inc = scratch("inc.json", r#"{"energies": [0, 1, 2], "populations": [0.1, 0.3, 0.6]}"#);
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["optimize", "--input", inc.to_str().unwrap(), "--r", "-20"]))).unwrap();
    assert_eq!(v["outcome"]["permutation"], "(3,1,2)");

    let coh = scratch(
        "coh.json",
        r#"{"energies": [0, 1], "matrix_re": [[0.5, 0.5], [0.5, 0.5]]}"#,
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["optimize", "--input", coh.to_str().unwrap(), "--r", "1e-9"]))).unwrap();
    assert_eq!(v["kind"], "coherent");
    assert!((v["outcome"]["utility"].as_f64().unwrap() - 0.5).abs() < 1e-8);

    let util = scratch("u.json", r#"{"type": "linear"}"#);
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "optimize",
        "--input",
        inc.to_str().unwrap(),
        "--utility",
        util.to_str().unwrap(),
    ])))
    .unwrap();
    assert_eq!(v["outcome"]["permutation"], "(3,2,1)");

    let e: serde_json::Value = serde_json::from_str(&stdout(&run(&["ergotropy", "--input", inc.to_str().unwrap()]))).unwrap();
    assert!((e["ergotropy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn qsweep_column_properties() {
    let coh = scratch(
        "qs.json",
        r#"{"energies": [0, 1], "matrix_re": [[0.35, 0.2], [0.2, 0.65]], "matrix_im": [[0, 0.15], [-0.15, 0]]}"#,
    );
    let csv = stdout(&run(&["qsweep", "--input", coh.to_str().unwrap(), "--r", "-0.8", "--q-steps", "11"]));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    let min = rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    assert_eq!(min, rows[5][1]);
    assert!(rows.iter().all(|r| r[2] >= 1.0 - 1e-10 && r[3] <= 1e-10));
}

#[test]
fn compare_finds_crossing() {
    let corr = scratch("corr.json", r#"{"energies": [0, 1, 1, 2], "populations": [0.33, 0.34, 0.22, 0.11], "subsystems": [2, 2]}"#);
    // marginals (0.67, 0.33) and (0.55, 0.45)
    let prod = scratch(
        "prod.json",
        r#"{"energies": [0, 1, 1, 2], "populations": [0.3685, 0.3015, 0.1815, 0.1485], "subsystems": [2, 2]}"#,
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "compare",
        "--input",
        corr.to_str().unwrap(),
        "--other",
        prod.to_str().unwrap(),
        "--r-min",
        "-3",
        "--r-max",
        "1",
        "--grid",
        "41",
    ])))
    .unwrap();
    let r = v["crossing"].as_f64().unwrap();
    assert!((r + 0.8).abs() < 0.05, "r = {r}");

    let same: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "compare",
        "--input",
        corr.to_str().unwrap(),
        "--other",
        corr.to_str().unwrap(),
        "--r",
        "0.3",
    ])))
    .unwrap();
    assert_eq!(same["entries"][0]["preference"], "indifferent");
}

#[test]
fn oracle_is_deterministic() {
    let inc = scratch("or.json", r#"{"energies": [0, 1], "populations": [0.25, 0.75]}"#);
    let args = ["oracle", "--input", inc.to_str().unwrap(), "--r", "0.5", "--budget", "10", "--seed", "7"];
    let a = stdout(&run(&args));
    assert_eq!(a, stdout(&run(&args)));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    // swap: (1 - 0.25 e^{0.5} - 0.75 e^{-0.5}) / 0.5
    let exact = (1.0 - 0.25 * 0.5f64.exp() - 0.75 * (-0.5f64).exp()) / 0.5;
    assert!((v["best_value"].as_f64().unwrap() - exact).abs() < 1e-8);
    assert_eq!(v["seed"], 7);
}

#[test]
fn errors_are_single_line() {
    assert_single_line_error(&run(&["optimize", "--input", "/nonexistent.json"]), "IO");
    assert_single_line_error(&run(&["phase-d2", "--grid", "1"]), "INVALID_RANGE");
    assert_single_line_error(&run(&["phase-d2", "--p-min", "0", "--grid", "3"]), "INVALID_RANGE");
    assert_single_line_error(&run(&["frobnicate"]), "USAGE");

    let bad = scratch("bad.json", r#"{"energies": [0, 1], "populations": [0.7, 0.7]}"#);
    assert_single_line_error(&run(&["ergotropy", "--input", bad.to_str().unwrap()]), "INVALID_STATE");

    let a = scratch("ha.json", r#"{"energies": [0, 1], "populations": [0.5, 0.5]}"#);
    let b = scratch("hb.json", r#"{"energies": [0, 2], "populations": [0.5, 0.5]}"#);
    assert_single_line_error(
        &run(&["compare", "--input", a.to_str().unwrap(), "--other", b.to_str().unwrap()]),
        "HAMILTONIAN_MISMATCH",
    );

    let out = bin()
        .env("RISKWORK_TOLERANCE_PROFILE", "lenient")
        .args(["ergotropy", "--input", a.to_str().unwrap()])
        .output()
        .unwrap();
    assert_single_line_error(&out, "INVALID_TOLERANCE_PROFILE");
}

#[test]
fn tolerance_profiles_accepted() {
    let a = scratch("tp.json", r#"{"energies": [0, 1], "populations": [0.3, 0.7]}"#);
    for profile in ["strict", "default"] {
        let out = bin()
            .env("RISKWORK_TOLERANCE_PROFILE", profile)
            .args(["ergotropy", "--input", a.to_str().unwrap()])
            .output()
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert!((v["ergotropy"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    }
}
