//! End-to-end runs of the command-line interface against temporary
//! directories, checking exit codes, emitted files, and determinism.

use fifo_sim_cli::{run, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use std::fs;
use std::path::Path;

const CHAIN2_SIMULATE: &str = r#"
[network]
cells = 2
root = 1
jam_densities = 2.0

[[network.edges]]
from = 1
to = 2
beta = 1.0

[fd]
v = 1.0
w = 1.0
capacity = 1.0

[sim]
dt = 1e-3
horizon = 1.0
record_every = 10

[experiment]
kind = "simulate"
x0 = [1.0, 0.0]
"#;

fn run_args(args: &[&str]) -> u8 {
    run(args.iter().map(|s| s.to_string()))
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_chain_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CHAIN2_SIMULATE);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "simulate",
        &config,
        "--dt",
        "1e-3",
        "--horizon",
        "0.5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2");
    // 500 steps, stride 10, plus the initial sample
    assert_eq!(lines.count(), 51);
    let report = fs::read_to_string(out.join("sim_report.txt")).unwrap();
    assert!(report.contains("result=pass"));
}

#[test]
fn example1_emits_bundles_and_order_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // short horizon keeps the test quick; the full horizon runs in the
    // acceptance suite
    let code = run_args(&[
        "fifo-sim",
        "example1",
        "--horizon",
        "0.05",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    for k in 1..=6 {
        assert!(out.join(format!("trajectory_k{k}.csv")).exists());
    }
    for cell in [2, 6, 9] {
        let csv = fs::read_to_string(out.join(format!("z_cell{cell}.csv"))).unwrap();
        assert!(csv.starts_with("t,z_k1,z_k2,z_k3,z_k4,z_k5,z_k6"));
    }
    let report = fs::read_to_string(out.join("order_report.txt")).unwrap();
    assert!(report.contains("pairs=15"));
    assert!(report.contains("passed=15"));
    assert!(report.contains("result=pass"));
}

#[test]
fn example1_write_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("example1.toml");
    let code = run_args(&[
        "fifo-sim",
        "example1",
        "--horizon",
        "0.01",
        "--out-dir",
        out.to_str().unwrap(),
        "--write-config",
        config_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    let text = fs::read_to_string(&config_path).unwrap();
    let parsed = fifo_sim_cli::config::ConfigFile::parse(&text).unwrap();
    assert_eq!(parsed, fifo_sim_cli::config::ConfigFile::example1());
}

#[test]
fn missing_fd_entry_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CHAIN2_SIMULATE.replace("capacity = 1.0", "capacity = [1.0]");
    let config = write_config(dir.path(), &bad);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "simulate",
        &config,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CHAIN2_SIMULATE.replace("record_every = 10", "record_evry = 10");
    let config = write_config(dir.path(), &bad);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "simulate",
        &config,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CHAIN2_SIMULATE);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "property-test",
        &config,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn property_test_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHAIN2_SIMULATE.replace(
        "kind = \"simulate\"\nx0 = [1.0, 0.0]",
        "kind = \"property-test\"\nn_pairs = 8\nseed = 13",
    );
    let config = write_config(dir.path(), &text);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let code = run_args(&[
            "fifo-sim",
            "property-test",
            &config,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_PASS);
    }
    let a = fs::read(out_a.join("property_report.txt")).unwrap();
    let b = fs::read(out_b.join("property_report.txt")).unwrap();
    assert_eq!(
        a, b,
        "same config and seed must produce byte-identical reports"
    );
}

#[test]
fn orthant_witness_needs_a_diverge() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHAIN2_SIMULATE.replace(
        "kind = \"simulate\"\nx0 = [1.0, 0.0]",
        "kind = \"orthant-witness\"",
    );
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "orthant-witness",
        &config,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAIL);
}

#[test]
fn cumulative_check_on_chain() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHAIN2_SIMULATE
        .replace("horizon = 1.0", "horizon = 25.0")
        .replace(
            "kind = \"simulate\"\nx0 = [1.0, 0.0]",
            "kind = \"cumulative-check\"\nx0 = [1.0, 0.0]\neps_empty_rel = 1e-6",
        );
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "cumulative-check",
        &config,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    let report = fs::read_to_string(out.join("cumulative_report.txt")).unwrap();
    assert!(report.contains("result=pass"));
}

#[test]
fn km_check_on_reference_network() {
    let dir = tempfile::tempdir().unwrap();
    // generate the reference config, then rewrite it for the km check
    let config_path = dir.path().join("example1.toml");
    fs::write(
        &config_path,
        fifo_sim_cli::config::ConfigFile::example1()
            .to_toml()
            .replace(
                "kind = \"example1\"",
                "kind = \"km-check\"\nn_points = 50\nseed = 2",
            ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = run_args(&[
        "fifo-sim",
        "km-check",
        config_path.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    let report = fs::read_to_string(out.join("km_report.txt")).unwrap();
    assert!(report.contains("result=pass"));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(run_args(&["fifo-sim", "--help"]), EXIT_PASS);
    assert_eq!(run_args(&["fifo-sim", "no-such-command"]), EXIT_CONFIG);
}

#[test]
fn plotdata_rejects_mismatched_grids() {
    use fifo_sim_cli::report::emit_plotdata;
    use fifo_sim_core::harness;
    use fifo_sim_core::order::ConeOrder;
    use fifo_sim_core::sim::{simulate, SimConfig};

    let setup = harness::build_example1().unwrap();
    let order = ConeOrder::for_network(&setup.network).unwrap();
    let x0 = &setup.initial_conditions[2];
    let a = simulate(&setup.network, &setup.fds, x0, &SimConfig::new(1e-3, 0.01)).unwrap();
    let b = simulate(&setup.network, &setup.fds, x0, &SimConfig::new(5e-4, 0.01)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let err = emit_plotdata(dir.path(), &order, &[a.clone(), b], &[2]).unwrap_err();
    assert!(err.contains("grid"), "{err}");

    // empty selections succeed and write nothing
    let written = emit_plotdata(dir.path(), &order, &[a], &[]).unwrap();
    assert!(written.is_empty());
}
