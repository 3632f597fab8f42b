//! End-to-end tests driving the compiled `kdfe` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kdfe::bandwidth::{minimize_h, BandwidthChoice, SelectionMethod};
use kdfe::emfit::MixtureFit;
use kdfe::kernels::kernel_cdf;
use kdfe::mise::exact_mise;
use kdfe::specfun::normal_quantile;
use kdfe::{catalog, FittedCdf, KernelSpec};
use sha2::{Digest, Sha256};

fn kdfe_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdfe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = kdfe_cmd(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn stderr_of_failure(args: &[&str]) -> String {
    let out = kdfe_cmd(args);
    assert!(!out.status.success(), "command {:?} unexpectedly succeeded", args);
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Splits one CSV line into cells, honoring double-quoted fields.
fn csv_cells(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cell = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cell.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => cells.push(std::mem::take(&mut cell)),
            _ => cell.push(c),
        }
    }
    cells.push(cell);
    cells
}

/// Splits CSV output into a header and data rows.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = csv_cells(lines.next().expect("header"));
    let rows = lines.map(csv_cells).collect();
    (header, rows)
}

fn write_normal_scores(path: &Path, n: usize) {
    let rows: Vec<String> = (0..n)
        .map(|i| normal_quantile((i as f64 + 0.5) / n as f64).unwrap().to_string())
        .collect();
    fs::write(path, rows.join("\n")).unwrap();
}

#[test]
fn mise_rows_match_library_values() {
    let text = stdout_of(&["mise", "--mixture", "mw6", "--n", "50", "--r", "2", "--h", "0.2:1:5"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["h", "isb", "iv", "mise", "relative_mise"]);
    assert_eq!(rows.len(), 5);
    let nm = catalog("mw6").unwrap().as_mixture().unwrap().clone();
    for row in &rows {
        let h: f64 = row[0].parse().unwrap();
        let b = exact_mise(&nm, KernelSpec::Finite(2), h, 50).unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), b.isb);
        assert_eq!(row[2].parse::<f64>().unwrap(), b.iv);
        assert_eq!(row[3].parse::<f64>().unwrap(), b.mise);
        let rel: f64 = row[4].parse().unwrap();
        assert_eq!(rel, 100.0 * (b.mise * 50.0 / nm.v0() - 1.0));
    }
}

#[test]
fn mise_accepts_a_mixture_file_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bimodal.json");
    // Same parameters as catalog mw6.
    fs::write(
        &path,
        r#"{"weights":[0.5,0.5],"means":[-1.0,1.0],
            "sds":[0.6666666666666666,0.6666666666666666]}"#,
    )
    .unwrap();
    let args_file =
        ["mise", "--mixture", path.to_str().unwrap(), "--n", "80", "--r", "3", "--h", "0.1:0.9:4"];
    let from_file = stdout_of(&args_file);
    let from_catalog =
        stdout_of(&["mise", "--mixture", "mw6", "--n", "80", "--r", "3", "--h", "0.1:0.9:4"]);
    assert_eq!(from_file, from_catalog);
    assert_eq!(from_file, stdout_of(&args_file), "rerun must be byte-identical");
}

#[test]
fn mise_rejects_bad_mixture_arguments() {
    let err = stderr_of_failure(&["mise", "--mixture", "gamma21", "--n", "50", "--r", "1", "--h", "0.3"]);
    assert!(err.contains("not a normal mixture"), "got: {err}");
    let err = stderr_of_failure(&["mise", "--mixture", "nope", "--n", "50", "--r", "1", "--h", "0.3"]);
    assert!(err.contains("neither a catalog id"), "got: {err}");
    let err = stderr_of_failure(&["mise", "--mixture", "mw1", "--n", "50", "--r", "0", "--h", "0.3"]);
    assert!(!err.is_empty());
}

#[test]
fn bandwidth_oracle_emits_json_choice() {
    let args = ["bandwidth", "--mixture", "mw1", "--n", "100", "--method", "oracle"];
    let text = stdout_of(&args);
    let choice: BandwidthChoice = serde_json::from_str(&text).unwrap();
    assert_eq!(choice.method, SelectionMethod::ExactOracle);
    assert!(choice.h > 0.0);
    let nm = catalog("mw1").unwrap().as_mixture().unwrap().clone();
    let edf_risk = nm.v0() / 100.0;
    assert!(choice.predicted_mise.unwrap() < edf_risk);
    assert_eq!(text, stdout_of(&args), "rerun must be byte-identical");
}

#[test]
fn bandwidth_r_flag_pins_the_kernel() {
    let text =
        stdout_of(&["bandwidth", "--mixture", "mw3", "--n", "60", "--method", "oracle", "--r", "1"]);
    let choice: BandwidthChoice = serde_json::from_str(&text).unwrap();
    assert_eq!(choice.kernel, KernelSpec::Finite(1));
    let nm = catalog("mw3").unwrap().as_mixture().unwrap().clone();
    let lib = minimize_h(&nm, KernelSpec::Finite(1), 60).unwrap();
    assert_eq!(choice.h, lib.h);
    assert_eq!(choice.predicted_mise, lib.predicted_mise);
}

#[test]
fn bandwidth_validates_method_inputs() {
    let err = stderr_of_failure(&["bandwidth", "--method", "oracle"]);
    assert!(err.contains("--mixture"), "got: {err}");
    let err = stderr_of_failure(&["bandwidth", "--method", "plugin-bic"]);
    assert!(err.contains("--data"), "got: {err}");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    write_normal_scores(&data, 30);
    let err = stderr_of_failure(&[
        "bandwidth", "--data", data.to_str().unwrap(), "--method", "cv", "--r", "2",
    ]);
    assert!(err.contains("second-order"), "got: {err}");
    // --data and --mixture are mutually exclusive (clap-level).
    let err = stderr_of_failure(&[
        "bandwidth", "--data", data.to_str().unwrap(), "--mixture", "mw1", "--method", "nrr",
    ]);
    assert!(err.contains("cannot be used with"), "got: {err}");
}

#[test]
fn bandwidth_nrr_from_data_uses_sample_spread() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    write_normal_scores(&data, 80);
    let text = stdout_of(&["bandwidth", "--data", data.to_str().unwrap(), "--method", "nrr"]);
    let choice: BandwidthChoice = serde_json::from_str(&text).unwrap();
    assert_eq!(choice.method, SelectionMethod::Nrr);
    assert_eq!(choice.kernel, KernelSpec::Finite(1));
    // Normal scores have sd close to 1, so the rule lands near the exact
    // standard-normal h1*(80).
    let std = kdfe::NormalMixture::standard_normal();
    let h_star = minimize_h(&std, KernelSpec::Finite(1), 80).unwrap().h;
    assert!((choice.h - h_star).abs() < 0.15 * h_star, "h = {}, h* = {h_star}", choice.h);
}

#[test]
fn fit_recovers_a_single_component_on_normal_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    write_normal_scores(&data, 60);
    let text = stdout_of(&[
        "fit", "--data", data.to_str().unwrap(), "--criterion", "bic", "--mmax", "3",
        "--restarts", "4", "--seed", "7",
    ]);
    let fit: MixtureFit = serde_json::from_str(&text).unwrap();
    assert_eq!(fit.m, 1);
    assert!(fit.converged);
    assert!(fit.mixture.means()[0].abs() < 0.05);
    assert!((fit.mixture.sds()[0] - 1.0).abs() < 0.1);
}

#[test]
fn estimate_at_zero_bandwidth_prints_the_edf() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    fs::write(&data, "1\n2\n3\n").unwrap();
    let text = stdout_of(&[
        "estimate", "--data", data.to_str().unwrap(), "--h", "0", "--r", "1", "--grid", "0:4:5",
    ]);
    assert_eq!(text, "x,fhat\n0,0\n1,0.3333333333333333\n2,0.6666666666666666\n3,1\n4,1\n");
}

#[test]
fn estimate_matches_library_and_rearrange_sorts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    write_normal_scores(&data, 12);
    let sample: Vec<f64> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();

    let raw = stdout_of(&[
        "estimate", "--data", data.to_str().unwrap(), "--h", "0.8", "--r", "4", "--grid",
        "-3:3:41",
    ]);
    let (_, rows) = csv_rows(&raw);
    let fc = FittedCdf::new(sample, 0.8, KernelSpec::Finite(4)).unwrap();
    for row in &rows {
        let x: f64 = row[0].parse().unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), fc.eval(x));
    }

    let fixed = stdout_of(&[
        "estimate", "--data", data.to_str().unwrap(), "--h", "0.8", "--r", "4", "--grid",
        "-3:3:41", "--rearrange",
    ]);
    let (_, rows) = csv_rows(&fixed);
    let values: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for w in values.windows(2) {
        assert!(w[0] <= w[1], "rearranged output must be sorted");
    }
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn simulate_writes_deterministic_files_and_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    let config_text = r#"{
        "distribution": "mw6",
        "n": 20,
        "replications": 4,
        "seed": 42,
        "methods": [
            {"method": "edf"},
            {"method": "nrr"},
            {"method": "cv"},
            {"method": "plugin", "rule": {"fixed": 1}, "orders": "second_order"},
            {"method": "parametric", "rule": {"fixed": 1}}
        ],
        "restarts": 3
    }"#;
    fs::write(&config, config_text).unwrap();

    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        stdout_of(&[
            "simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(),
        ]);
    }
    for name in ["records.csv", "summary.csv", "manifest.json"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across reruns");
    }

    let (header, rows) = csv_rows(&fs::read_to_string(out1.join("records.csv")).unwrap());
    assert_eq!(header, ["replication", "method", "ise", "h", "r", "m", "error"]);
    assert_eq!(rows.len(), 4 * 5, "one row per replication x method");
    // The plug-in and parametric rows share the per-replication fit, so both
    // report the same mixture size.
    for rep_rows in rows.chunks(5) {
        assert_eq!(rep_rows[3][1], "plugin_m1_r1");
        assert_eq!(rep_rows[4][1], "parametric_m1");
        assert_eq!(rep_rows[3][5], "1");
        assert_eq!(rep_rows[4][5], "1");
    }

    let (header, rows) = csv_rows(&fs::read_to_string(out1.join("summary.csv")).unwrap());
    assert_eq!(
        header,
        ["method", "used", "mean_ise", "baseline_mean_ise", "relative_reduction_pct", "p_value"]
    );
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "edf");
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][5].parse::<f64>().unwrap(), 1.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["effective_replications"], 4);
    assert_eq!(manifest["baseline"], "edf");
    let digest = Sha256::digest(config_text.as_bytes());
    let expected: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["config_sha256"], expected.as_str());
    assert!(manifest["versions"]["kdfe"].is_string());
}

#[test]
fn figure_shows_the_order_transition() {
    let text = stdout_of(&["figure", "--mixture", "mw1", "--nmin", "3", "--nmax", "6", "--points", "2"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(
        header,
        ["n", "rel_second_order", "rel_sinc", "rel_joint", "r_star", "rel_bound", "rel_nrr"]
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "3");
    assert_eq!(rows[0][4], "1");
    assert_eq!(rows[1][0], "6");
    assert_eq!(rows[1][4], "2");
    for row in &rows {
        let rel_r1: f64 = row[1].parse().unwrap();
        let rel_joint: f64 = row[3].parse().unwrap();
        let rel_bound: f64 = row[5].parse().unwrap();
        assert!(rel_joint <= rel_r1 + 1e-12);
        assert!(rel_bound <= rel_joint + 1e-12);
    }
}

#[test]
fn catalog_lists_every_distribution() {
    let text = stdout_of(&["catalog"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["id", "label", "family", "components", "mean", "sd"]);
    assert_eq!(rows.len(), 18);
    assert_eq!(rows[0][..4], ["mw1", "Gaussian", "normal_mixture", "1"]);
    let gamma = rows.iter().find(|r| r[0] == "gamma21").unwrap();
    assert_eq!(gamma[2], "gamma");
    assert_eq!(gamma[3], "", "non-mixtures report no component count");
}

#[test]
fn catalog_tabulates_kernel_cdfs() {
    let text = stdout_of(&["catalog", "--kernel", "2", "--x", "-1:1:3"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["x", "cdf"]);
    for row in &rows {
        let x: f64 = row[0].parse().unwrap();
        assert_eq!(
            row[1].parse::<f64>().unwrap(),
            kernel_cdf(KernelSpec::Finite(2), x).unwrap()
        );
    }
    // --x without --kernel (and vice versa) is a usage error.
    let err = stderr_of_failure(&["catalog", "--x", "0:1:3"]);
    assert!(err.contains("--kernel"), "got: {err}");
}
