//! Black-box behavior of the `conlab` binary: exit codes, output shapes,
//! reproducibility, config merging, and the `--validate` round-trip.

use std::path::Path;
use std::process::{Command, Output};

fn conlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conlab"))
        .args(args)
        .output()
        .expect("conlab binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_succeeds_with_defaults_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = conlab(&["simulate", "--out", out, "--validate"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));

    for file in ["trajectory.csv", "analysis.csv", "report.json"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    let report = read_json(&dir.path().join("report.json"));
    assert!(report["theorem1_holds"].as_bool().unwrap());
    assert!(report["theorem2_holds"].as_bool().unwrap());
    assert_eq!(report["config"]["topology"], "paper6");
    assert!(report["config"]["defaults_used"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v == "alpha"));
}

#[test]
fn identical_configs_produce_byte_identical_outputs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "simulate".to_string(),
            "--topology".to_string(),
            "paper6".to_string(),
            "--alpha".to_string(),
            "2".to_string(),
            "--horizon".to_string(),
            "2".to_string(),
            "--out".to_string(),
            out.to_string(),
        ]
    };
    let run_a = conlab(
        &args(dir_a.path().to_str().unwrap())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let run_b = conlab(
        &args(dir_b.path().to_str().unwrap())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    assert_eq!(exit_code(&run_a), 0, "{}", stderr_of(&run_a));
    assert_eq!(exit_code(&run_b), 0, "{}", stderr_of(&run_b));

    for file in ["trajectory.csv", "analysis.csv"] {
        let bytes_a = std::fs::read(dir_a.path().join(file)).unwrap();
        let bytes_b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{file} differs between identical runs");
    }
    let json_a = std::fs::read(dir_a.path().join("report.json")).unwrap();
    let json_b = std::fs::read(dir_b.path().join("report.json")).unwrap();
    assert_eq!(json_a, json_b, "report.json differs between identical runs");
}

#[test]
fn trajectory_header_lists_edges_by_default_and_all_pairs_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&["simulate", "--horizon", "0.1", "--out", out]);
    assert_eq!(exit_code(&run), 0);
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,x_1,x_2,x_3,x_4,x_5,x_6,w_1_2,w_1_6,w_2_3,w_2_5,w_3_4,w_4_5,w_5_6,\
         cost_acc,disagreement_acc"
    );

    let run = conlab(&["simulate", "--horizon", "0.1", "--all-pairs", "--out", out]);
    assert_eq!(exit_code(&run), 0);
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = text.lines().next().unwrap();
    let weight_columns = header.split(',').filter(|c| c.starts_with("w_")).count();
    assert_eq!(weight_columns, 15);
    assert!(header.contains("w_1_3"));
}

#[test]
fn analysis_csv_has_the_series_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&["simulate", "--topology", "p2", "--x0", "0,2", "--out", out]);
    assert_eq!(exit_code(&run), 0);
    let text = std::fs::read_to_string(dir.path().join("analysis.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,V,V_dot,rho");
    assert!(text.ends_with('\n'));
    assert!(
        text.lines().skip(1).any(|line| line.ends_with(',')),
        "converged tail should hold skipped rho cells"
    );
}

#[test]
fn wrong_x0_length_exits_2() {
    let run = conlab(&["simulate", "--topology", "paper6", "--x0", "1,2,3,4,5"]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("x0"));
}

#[test]
fn unknown_topology_exits_2() {
    let run = conlab(&["simulate", "--topology", "ring42"]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("ring42"));
}

#[test]
fn disconnected_topology_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disconnected.txt");
    std::fs::write(&path, "4\n1 2\n3 4\n").unwrap();
    let run = conlab(&["simulate", "--topology", path.to_str().unwrap()]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("disconnected") || stderr_of(&run).contains("unreachable"));
}

#[test]
fn edge_list_files_load_with_comments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("triangle.txt");
    std::fs::write(&path, "# a triangle\n3\n1 2\n2 3\n# closing edge\n1 3\n").unwrap();
    let run = conlab(&["topology-info", "--topology", path.to_str().unwrap()]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let info: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&run.stdout)).unwrap();
    assert_eq!(info["node_count"], 3);
    assert_eq!(info["edge_count"], 3);
    let lambda2 = info["lambda2"].as_f64().unwrap();
    assert!((lambda2 - 3.0).abs() < 1e-9);
}

#[test]
fn invalid_mode_exits_2() {
    let run = conlab(&["simulate", "--mode", "turbo"]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("turbo"));
}

#[test]
fn sweep_rejects_thin_or_duplicated_gains() {
    let run = conlab(&["sweep", "--alphas", "2"]);
    assert_eq!(exit_code(&run), 2);

    let run = conlab(&["sweep", "--alphas", "1,1,2,4"]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("distinct"));

    let run = conlab(&["sweep"]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("alphas"));
}

#[test]
fn sweep_orders_output_by_ascending_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "sweep",
        "--topology",
        "p2",
        "--x0",
        "0,2",
        "--alphas",
        "4,1,2,0.5",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let alphas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|line| line.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(alphas, vec![0.5, 1.0, 2.0, 4.0]);
}

#[test]
fn cost_beyond_explicit_horizon_exits_2() {
    let run = conlab(&[
        "cost",
        "--topology",
        "p2",
        "--x0",
        "0,2",
        "--horizon",
        "2",
        "--cost-horizon",
        "5",
    ]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("cost-horizon"));
}

#[test]
fn short_cost_run_exits_3_with_advice() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "cost",
        "--topology",
        "p2",
        "--x0",
        "0,2",
        "--horizon",
        "0.4",
        "--cost-horizon",
        "0.4",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 3);
    assert!(stderr_of(&run).contains("longer horizon"));
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    std::fs::write(
        &config_path,
        "{\"topology\": \"p2\", \"x0\": [0.0, 2.0], \"alpha\": 1.0, \"horizon\": 2.0}\n",
    )
    .unwrap();
    let out = dir.path().join("results");
    let run = conlab(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--alpha",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["alpha"].as_f64().unwrap(), 4.0);
    assert_eq!(report["config"]["topology"], "p2");
    let defaults = report["config"]["defaults_used"].as_array().unwrap();
    assert!(!defaults.iter().any(|v| v == "alpha"));
    assert!(!defaults.iter().any(|v| v == "horizon"));
    assert!(defaults.iter().any(|v| v == "zeta"));
}

#[test]
fn config_file_typos_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    std::fs::write(&config_path, "{\"alhpa\": 2.0}\n").unwrap();
    let run = conlab(&["simulate", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&run), 2);
    assert!(stderr_of(&run).contains("alhpa"));
}

#[test]
fn negative_x0_values_parse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "simulate",
        "--topology",
        "p2",
        "--x0",
        "-1,-3",
        "--horizon",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["config"]["x0"][0].as_f64().unwrap(), -1.0);
}

#[test]
fn consensus_start_reports_time_zero_and_zero_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "cost",
        "--topology",
        "p2",
        "--x0",
        "5,5",
        "--horizon",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let report = read_json(&dir.path().join("cost.json"));
    assert_eq!(report["jr_h"].as_f64().unwrap(), 0.0);
    assert_eq!(report["jr_star"].as_f64().unwrap(), 0.0);
    let text = std::fs::read_to_string(dir.path().join("cost.csv")).unwrap();
    for line in text.lines().skip(1) {
        let cost: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(cost, 0.0);
    }
}

#[test]
fn compare_reports_the_bound_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "compare",
        "--topology",
        "p2",
        "--x0",
        "0,2",
        "--horizon",
        "4",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let report = read_json(&dir.path().join("compare.json"));
    let lambda2 = report["lambda2"].as_f64().unwrap();
    let ratio = report["rho_bound_ratio"].as_f64().unwrap();
    assert!((ratio - (2.0 * lambda2 + 1.0) / (2.0 * lambda2)).abs() < 1e-12);
    assert!(dir.path().join("adaptive_trajectory.csv").exists());
    assert!(dir.path().join("standard_trajectory.csv").exists());
}

#[test]
fn not_reached_consensus_serializes_as_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = conlab(&[
        "simulate",
        "--topology",
        "p2",
        "--x0",
        "0,2",
        "--horizon",
        "0.05",
        "--out",
        out,
    ]);
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["consensus_time"], "not reached");
}
