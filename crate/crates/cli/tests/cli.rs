use std::fs;
use std::path::Path;
use std::process::Command;

use rfk::config::{from_preset, parse_config};
use rfk::{Experiment, ExperimentConfig};
use radial_kernels::solvers::Solver;

const MINI: &str = "
seed = 7
[system]
class = first-order-homogeneous
d = 2
n = 3
kernel = constant:-1
[initial]
positions = box:0:1
[data]
L = 5
L_prime = 20
J = 12
T = 0.1
T_tilde = 0.2
noise = 0.001
[features]
N = 50
theta = 4
[solver]
method = htp
sparsity = 10
[evaluation]
M = 5
tabulate_nodes = 2001
curve_points = 50
[sweep]
s_list = 2,5,10
";

fn rfk(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rfk")).args(args).output().expect("binary runs")
}

fn write_mini(dir: &Path, extra: &str) -> String {
    let p = dir.join("mini.cfg");
    fs::write(&p, format!("{MINI}\n{extra}\n")).unwrap();
    p.display().to_string()
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_raw(&parse_config(text).unwrap()).unwrap()
}

fn report_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing `{key}`"))
        .to_string()
}

#[test]
fn parse_errors_name_key_and_line() {
    let text = MINI.replace("L = 5", "L = five");
    let e = ExperimentConfig::from_raw(&parse_config(&text).unwrap()).unwrap_err().to_string();
    assert!(e.contains("data.L"), "{e}");
    let line = MINI.lines().position(|l| l == "L = 5").unwrap() + 1;
    assert!(e.contains(&format!("line {line}")), "{e}");

    let e = parse_config("[data]\nbogus = 1\n").unwrap_err().to_string();
    assert!(e.contains("data.bogus") && e.contains("line 2"), "{e}");
}

#[test]
fn forecast_horizon_shorter_than_training_is_rejected() {
    let text = MINI.replace("T_tilde = 0.2", "T_tilde = 0.05");
    let e = ExperimentConfig::from_raw(&parse_config(&text).unwrap()).unwrap_err().to_string();
    assert!(e.contains("data.T_tilde"), "{e}");
}

#[test]
fn lennard_jones_preset_matches_table() {
    let c = ExperimentConfig::from_raw(&from_preset("lennard-jones").unwrap()).unwrap();
    assert_eq!(c.n(), 7);
    assert_eq!(c.trajectories, 100);
    assert_eq!(c.density_trajectories, 2000);
    assert_eq!(c.timestamps, 150);
    assert_eq!(c.t_end, 0.01);
    assert_eq!(c.t_tilde, 0.5);
    assert_eq!(c.noise, 0.001);
    assert_eq!(c.features[0][0], 1000);
    assert_eq!(c.theta, 35.0);
    assert!(matches!(c.solver, Solver::Htp { sparsity: 150, .. }));
}

#[test]
fn cucker_smale_preset_matches_table() {
    let c = ExperimentConfig::from_raw(&from_preset("cucker-smale").unwrap()).unwrap();
    assert_eq!(c.n(), 10);
    assert_eq!((c.trajectories, c.density_trajectories, c.timestamps), (50, 2000, 200));
    assert_eq!((c.t_end, c.t_tilde, c.noise), (0.25, 0.5, 0.01));
    assert_eq!((c.features[0][0], c.theta), (1000, 1.0));
    assert!(matches!(c.solver, Solver::Htp { sparsity: 500, .. }));
}

#[test]
fn heterogeneous_presets_match_tables() {
    let pp = ExperimentConfig::from_raw(&from_preset("predator-prey").unwrap()).unwrap();
    assert_eq!(pp.counts, [9, 1]);
    assert_eq!((pp.trajectories, pp.density_trajectories, pp.timestamps), (50, 2000, 200));
    assert_eq!((pp.t_end, pp.t_tilde, pp.noise), (5.0, 10.0, 0.001));
    assert_eq!(pp.features, [[500, 500], [500, 50]]);
    assert_eq!(pp.theta, 30.0);
    assert!(matches!(pp.solver, Solver::Htp { sparsity: 400, .. }));

    let sf = ExperimentConfig::from_raw(&from_preset("sheep-food").unwrap()).unwrap();
    assert_eq!(sf.counts, [20, 40]);
    assert_eq!((sf.trajectories, sf.density_trajectories, sf.timestamps), (50, 1000, 600));
    assert_eq!((sf.t_end, sf.t_tilde, sf.noise), (100.0, 400.0, 0.001));
    assert_eq!(sf.features, [[500, 500], [50, 50]]);
    assert_eq!(sf.theta, 10.0);
    assert!(matches!(sf.solver, Solver::Htp { sparsity: 600, .. }));
}

#[test]
fn explicit_lines_win_over_preset() {
    let c = cfg("preset = lennard-jones\n[data]\nL = 3\n");
    assert_eq!(c.trajectories, 3);
    assert_eq!(c.timestamps, 150);
}

#[test]
fn equal_horizons_cover_the_training_interval() {
    let c = cfg(&MINI.replace("T_tilde = 0.2", "T_tilde = 0.1"));
    let exp = Experiment::new(c).unwrap();
    let t = exp.test_times();
    assert_eq!(t.len(), 12);
    assert_eq!(t[0], 0.0);
    assert!((t[t.len() - 1] - 0.1).abs() < 1e-12);
    assert_eq!(exp.transition_step(&t), t.len() - 1);
}

#[test]
fn test_grid_extends_training_spacing() {
    let exp = Experiment::new(cfg(MINI)).unwrap();
    let t = exp.test_times();
    assert_eq!(t.len(), 23);
    assert!((t[22] - 0.2).abs() < 1e-12);
    assert!((t[11] - 0.1).abs() < 1e-12);
}

#[test]
fn forecast_without_basis_equals_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_mini(dir.path(), "");
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert!(rfk(&["simulate", "--config", &c, "--out", out, "-q"]).status.success());
    assert!(rfk(&["forecast", "--config", &c, "--out", out, "-q"]).status.success());
    let a = fs::read(dir.path().join("o/simulate.csv")).unwrap();
    let b = fs::read(dir.path().join("o/forecast.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_mini(dir.path(), "");
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let bad = rfk(&["run", "--config", &c, "--out", out, "--set", "data.bogus=1", "-q"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("data.bogus"));
    let missing = rfk(&["evaluate", "--config", &c, "--out", out, "--basis", "/nonexistent/basis.csv", "-q"]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = rfk(&["run", "--preset", "no-such-preset", "--out", out, "-q"]);
    assert_eq!(unknown.status.code(), Some(2));
    let wide = rfk(&["sweep-sparsity", "--config", &c, "--out", out, "--s-list", "10,51", "-q"]);
    assert_eq!(wide.status.code(), Some(2));
}

#[test]
fn run_then_evaluate_round_trips_the_basis() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_mini(dir.path(), "");
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    let run = rfk(&["run", "--config", &c, "--out", out_s, "-q"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    let basis = out.join("basis_srre.csv");
    let ev = rfk(&["evaluate", "--config", &c, "--out", out_s, "--basis", basis.to_str().unwrap(), "-q"]);
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    let eval = fs::read_to_string(out.join("evaluate.txt")).unwrap();
    let a: f64 = report_value(&report, "srre.kernel_rel").parse().unwrap();
    let b: f64 = report_value(&eval, "model.kernel_rel").parse().unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
    for name in ["truth.csv", "forecast_rre.csv", "forecast_srre.csv", "kernel_rre.csv", "basis_rre.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn sweep_writes_one_row_per_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_mini(dir.path(), "");
    let out = dir.path().join("o");
    let r = rfk(&["sweep-sparsity", "--config", &c, "--out", out.to_str().unwrap(), "-q"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("sweep_sparsity.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,kernel_rel_err,path_mean,path_std");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,") && lines[3].starts_with("10,"));
}

#[test]
fn feature_comparison_shares_data_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_mini(dir.path(), "");
    let out = dir.path().join("o");
    let r = rfk(&["compare-rff", "--config", &c, "--out", out.to_str().unwrap(), "-q"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report = fs::read_to_string(out.join("compare_rff.txt")).unwrap();
    assert_eq!(report_value(&report, "radial.data_checksum"), report_value(&report, "fourier.data_checksum"));
    let grid = |name: &str| -> Vec<String> {
        fs::read_to_string(out.join(name)).unwrap().lines().map(|l| l.split(',').next().unwrap().to_string()).collect()
    };
    assert_eq!(grid("kernel_radial.csv"), grid("kernel_fourier.csv"));
}

#[test]
fn zero_kernel_without_noise_has_zero_risk() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINI.replace("kernel = constant:-1", "kernel = zero").replace("noise = 0.001", "noise = 0");
    let p = dir.path().join("zero.cfg");
    fs::write(&p, text).unwrap();
    let out = dir.path().join("o");
    let r = rfk(&["run", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap(), "-q"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    for label in ["rre", "srre"] {
        let risk: f64 = report_value(&report, &format!("{label}.empirical_risk")).parse().unwrap();
        assert!(risk.abs() <= 1e-16, "{label}: {risk}");
        assert_eq!(report_value(&report, &format!("{label}.kernel_zero_reference")), "true");
    }
}

#[test]
fn solver_choice_leaves_training_data_unchanged() {
    let checksum = |extra: &str| {
        let dir = tempfile::tempdir().unwrap();
        let c = write_mini(dir.path(), "");
        let out = dir.path().join("o");
        let mut args = vec!["run", "--config", c.as_str(), "--out", out.to_str().unwrap(), "-q"];
        args.extend(extra.split_whitespace());
        let r = rfk(&args);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        report_value(&fs::read_to_string(out.join("report.txt")).unwrap(), "data.checksum")
    };
    let base = checksum("");
    assert_eq!(base, checksum("--solver nnls"));
    assert_eq!(base, checksum("--set features.theta=9"));
    assert_ne!(base, checksum("--seed 8"));
}

#[test]
fn frequency_stream_is_independent_of_data_size() {
    let exp = |extra: &str| Experiment::new(cfg(&format!("{MINI}\n{extra}"))).unwrap();
    let a = rfk::pipeline::make_basis(&exp(""), false).unwrap();
    let b = rfk::pipeline::make_basis(&exp("[data]\nL = 9\n"), false).unwrap();
    assert_eq!(a.omegas, b.omegas);
}

#[test]
fn readme_documents_every_key() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    for (key, _) in rfk::config::KEYS {
        assert!(readme.contains(&format!("| `{key}` |")), "{key}");
    }
}
