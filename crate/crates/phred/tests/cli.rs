use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn phred(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phred"))
        .current_dir(dir)
        .env_remove("PHRED_DENSE_CEILING")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn model_then_reduce_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["model", "--family", "msd", "--n", "40", "--out", "full"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(&d.join("full/manifest.json"));
    assert_eq!(manifest["kind"], "port_hamiltonian");
    assert_eq!(manifest["n"], 40);

    let o = phred(d, &["reduce", "--model", "full", "--method", "irka_ph", "--order", "6", "--out", "red"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = json(&d.join("red/report.json"));
    assert_eq!(rep["converged"], true);
    assert_eq!(rep["r"], 6);
    assert!(rep["interpolation"]["points"].as_array().unwrap().len() == 6);
    assert!(rep["certificate"]["sylvester_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(rep["structure"]["passes"], true);
    for name in ["J", "R", "Q", "B"] {
        assert!(d.join(format!("red/{name}.mtx")).exists());
    }
    let o = phred(d, &["validate", "--model", "red"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn unstructured_methods_write_state_space_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["reduce", "--family", "ladder", "--n", "20", "--method", "balanced", "--order", "4", "--out", "bt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&d.join("bt/manifest.json"))["kind"], "state_space");
    assert!(d.join("bt/A.mtx").exists() && d.join("bt/C.mtx").exists());
    assert_eq!(json(&d.join("bt/report.json"))["hankel_values"].as_array().unwrap().len(), 20);
}

#[test]
fn order_not_below_n_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = phred(tmp.path(), &["reduce", "--family", "msd", "--n", "10", "--order", "10"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("reduction order must be < n"), "{}", stderr(&o));
}

#[test]
fn empty_method_list_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = phred(tmp.path(), &["compare", "--family", "msd", "--n", "10", "--method", "", "--orders", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_flags_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["reduce", "--order", "2"][..],
        &["reduce", "--family", "msd", "--n", "7", "--order", "2"],
        &["reduce", "--family", "msd", "--n", "10", "--order", "2", "--method", "newton"],
        &["reduce", "--family", "msd", "--n", "10", "--order", "2", "--init", "logspace:1"],
        &["reduce", "--model", "missing", "--order", "2"],
        &["freq", "--family", "msd", "--n", "10", "--grid", "linspace:1:2:3"],
    ] {
        let o = phred(tmp.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn dense_ceiling_surfaces_as_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_phred"))
        .current_dir(tmp.path())
        .env("PHRED_DENSE_CEILING", "16")
        .args(["reduce", "--family", "msd", "--n", "40", "--method", "balanced", "--order", "4"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("size limit"), "{}", stderr(&o));
}

#[test]
fn iteration_cap_writes_failure_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["reduce", "--family", "msd", "--n", "40", "--order", "6", "--max-iter", "2", "--out", "cap"]);
    assert_eq!(code(&o), 3);
    let rep = json(&d.join("cap/report.json"));
    assert_eq!(rep["converged"], false);
    assert_eq!(rep["failure"]["iterations"], 2);
}

#[test]
fn compare_table_has_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(
        d,
        &["compare", "--family", "msd", "--n", "30", "--method", "irka_ph,one_step,effort_bal", "--orders", "2:2:6", "--jobs", "3", "--out", "c"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.join("c/compare.csv"));
    assert_eq!(rows.len(), 9);
    let header = csv::Reader::from_path(d.join("c/compare.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["r", "method", "rel_h2", "rel_hinf_sampled", "iterations", "reason"]);
    for row in &rows {
        let h2: f64 = row[2].parse().unwrap();
        assert!(h2.is_finite() && h2 > 0.0 && h2 < 1.5);
    }
}

#[test]
fn compare_records_failed_cells_as_nan() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["compare", "--family", "msd", "--n", "30", "--method", "irka_ph,one_step", "--orders", "4", "--max-iter", "1", "--out", "c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.join("c/compare.csv"));
    let irka = rows.iter().find(|r| &r[1] == "irka_ph").unwrap();
    assert_eq!(&irka[2], "NaN");
    assert!(!irka[5].is_empty());
    let one = rows.iter().find(|r| &r[1] == "one_step").unwrap();
    assert!(one[2].parse::<f64>().unwrap().is_finite());
}

#[test]
fn compare_is_deterministic_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = |jobs: &'static str, out: &'static str| {
        vec!["compare", "--family", "ladder", "--n", "20", "--method", "irka_ph,effort_bal", "--orders", "1:1:3", "--jobs", jobs, "--out", out]
    };
    assert_eq!(code(&phred(d, &args("1", "a"))), 0);
    assert_eq!(code(&phred(d, &args("4", "b"))), 0);
    assert_eq!(fs::read(d.join("a/compare.csv")).unwrap(), fs::read(d.join("b/compare.csv")).unwrap());
}

#[test]
fn zero_signal_gives_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["simulate", "--family", "msd", "--n", "20", "--method", "irka_ph", "--order", "4", "--signal", "zero", "--t-end", "5", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&d.join("s/simulate.json"));
    for m in summary["models"].as_array().unwrap() {
        assert_eq!(m["max_abs_error"].as_f64().unwrap(), 0.0);
    }
    for row in csv_rows(&d.join("s/trajectories.csv")) {
        assert!(row.iter().skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn simulate_reports_energy_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["simulate", "--family", "msd", "--n", "20", "--method", "effort_bal", "--order", "6", "--t-end", "10", "--channel", "1:2", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&d.join("s/simulate.json"));
    assert_eq!(summary["output_channel"], 2);
    let models = summary["models"].as_array().unwrap();
    assert_eq!(models.len(), 2);
    for m in models {
        assert_eq!(m["passive"], true);
    }
    let o = phred(d, &["simulate", "--family", "msd", "--n", "20", "--channel", "3:1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn freq_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = phred(d, &["freq", "--family", "msd", "--n", "20", "--method", "one_step", "--order", "4", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_rows(&d.join("f/freq_full.csv")).len(), 500);
    assert_eq!(csv_rows(&d.join("f/freq_error_one_step_r4.csv")).len(), 500);
    let o = phred(d, &["freq", "--family", "msd", "--n", "20", "--grid", "logspace:1:1:1", "--out", "one"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.join("one/freq_full.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].len(), 2 + 4);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("run.json"),
        r#"{"model": {"family": "ladder", "n": 20}, "method": "irka_ph", "order": 3, "init": "logspace:1e-2:1e1", "out": "from-file"}"#,
    )
    .unwrap();
    let o = phred(d, &["reduce", "--config", "run.json", "--order", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&d.join("from-file/report.json"))["r"], 2);
    let o = phred(d, &["reduce", "--config", "run.json", "--family", "msd", "--n", "10"]);
    assert_eq!(code(&o), 2);
    fs::write(d.join("bad.json"), r#"{"model": {"family": "ladder", "n": 20}, "colour": 1}"#).unwrap();
    assert_eq!(code(&phred(d, &["reduce", "--config", "bad.json", "--order", "2"])), 2);
}

#[test]
fn init_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("init.json"),
        r#"{"points": [[0.01, 0], [0.1, 0]], "directions": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}"#,
    )
    .unwrap();
    let o = phred(d, &["reduce", "--family", "msd", "--n", "20", "--method", "one_step", "--order", "2", "--init", "file:init.json", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = json(&d.join("f/report.json"));
    let res = rep["interpolation_residuals"].as_array().unwrap();
    assert!(!res.is_empty());
    let o = phred(d, &["reduce", "--family", "msd", "--n", "20", "--method", "one_step", "--order", "3", "--init", "file:init.json"]);
    assert_eq!(code(&o), 2);
}
