//! Subcommand implementations. Every command writes into `out` and returns
//! the report it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use radial_kernels::datagen::simulate;
use radial_kernels::features::Tabulation;
use radial_kernels::io::{radius_grid, read_basis, write_basis, write_dataset, write_kernel_curve, DatasetMeta};
use radial_kernels::metrics::{format_num, ErrorReport};
use radial_kernels::solvers::Solver;
use radial_kernels::systems::distance;
use radial_kernels::{AgentState64, Error, RadialDensity64, SystemClass, SystemSpec64};

use crate::pipeline::{
    self, echo_config, kernel_errors, learned_kernel, make_basis, model_from_basis, note, pairs, path_error, prepare,
    record_data, record_kernel_errors, record_model, record_path_error, stage, table_for, train, training_data,
    Experiment,
};
use crate::{CliError, ConfigError};

/// Initial conditions used by `simulate` and `forecast`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcSource {
    Test,
    Train,
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Ok(path)
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn curve_grid(exp: &Experiment, rho: &RadialDensity64, fallback: &RadialDensity64) -> Vec<f64> {
    let src = if rho.is_empty() { fallback } else { rho };
    let (lo, hi) = if src.is_empty() { (0.0, 1.0) } else { src.support() };
    radius_grid(lo, hi, exp.cfg.curve_points)
}

fn pair_suffix(exp: &Experiment, a: usize, b: usize) -> String {
    if exp.cfg.class.is_heterogeneous() {
        format!("_{}{}", a + 1, b + 1)
    } else {
        String::new()
    }
}

fn simulate_paths(exp: &Experiment, spec: &SystemSpec64, ics: &[AgentState64], times: &[f64]) -> Result<String, CliError> {
    let traj = stage("forecast", simulate(spec, ics, times, &exp.cfg.integrator, exp.seeds.test))?;
    Ok(write_dataset(&traj, &DatasetMeta { transition_step: Some(exp.transition_step(times)) }))
}

/// Full pipeline: train every configured solver, evaluate, write artifacts.
pub fn run(exp: &Experiment, out: &Path) -> Result<ErrorReport, CliError> {
    let prep = prepare(exp)?;
    let mut report = ErrorReport::new();
    echo_config(&mut report, &exp.cfg);
    record_data(&mut report, exp, &prep);
    let table = table_for(exp, prep.density.r_max());
    let times = exp.test_times();
    report.set("test.steps", times.len());
    report.set("test.transition_step", exp.transition_step(&times));
    let ics = exp.test_ics(exp.cfg.test_ics)?;
    let shown = &ics[..exp.cfg.forecast_count.min(ics.len())];
    if !shown.is_empty() {
        write_file(out, "truth.csv", &simulate_paths(exp, &exp.spec, shown, &times)?)?;
    }
    let typed = exp.cfg.class.is_heterogeneous();
    let mut failure = None;
    for solver in pipeline::solvers(&exp.cfg) {
        let label = pipeline::label(solver.kind());
        let model = train(exp, &prep.system, &prep.basis, solver, label, table)?;
        record_model(&mut report, exp, &model, Some(&prep.data));
        let ke = kernel_errors(exp, &model.basis, &prep.density)?;
        record_kernel_errors(&mut report, label, &ke, typed);
        write_file(out, &format!("basis_{label}.csv"), &write_basis(&model.basis))?;
        for (a, b) in pairs(exp) {
            let rho = prep.density.pair(a, b);
            let grid = curve_grid(exp, rho, prep.density.all());
            let g = learned_kernel(&model.basis, a, b)?;
            let name = format!("kernel_{label}{}.csv", pair_suffix(exp, a, b));
            write_file(out, &name, &write_kernel_curve(&grid, exp.spec.kernel(a, b), &g, rho))?;
        }
        match path_error(exp, &model.learned, &ics, &times) {
            Ok(pe) => record_path_error(&mut report, label, &pe),
            Err(e) => {
                report.set(format!("{label}.path_failed"), e.to_string());
                failure.get_or_insert(e);
                continue;
            }
        }
        if !shown.is_empty() {
            match simulate_paths(exp, &model.learned, shown, &times) {
                Ok(text) => {
                    write_file(out, &format!("forecast_{label}.csv"), &text)?;
                }
                Err(e) => report.set(format!("{label}.forecast_failed"), e.to_string()),
            }
        }
    }
    write_file(out, "report.txt", &report.render())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Kernel and path-wise errors of a stored basis.
pub fn evaluate(exp: &Experiment, basis_path: &Path, out: &Path) -> Result<ErrorReport, CliError> {
    let basis = stage("basis", read_basis::<f64>(&read_file(basis_path)?))?;
    let density = pipeline::densities(exp)?;
    let model = model_from_basis(exp, basis, "model", table_for(exp, density.r_max()))?;
    let mut report = ErrorReport::new();
    echo_config(&mut report, &exp.cfg);
    report.set("density.samples", density.samples());
    report.set("model.support_size", model.report.support.len());
    let ke = kernel_errors(exp, &model.basis, &density)?;
    record_kernel_errors(&mut report, "model", &ke, exp.cfg.class.is_heterogeneous());
    let times = exp.test_times();
    let ics = exp.test_ics(exp.cfg.test_ics)?;
    let pe = path_error(exp, &model.learned, &ics, &times)?;
    record_path_error(&mut report, "model", &pe);
    write_file(out, "evaluate.txt", &report.render())?;
    Ok(report)
}

fn ics_for(exp: &Experiment, source: IcSource) -> Result<Vec<AgentState64>, CliError> {
    let count = exp.cfg.forecast_count.max(1);
    match source {
        IcSource::Test => exp.test_ics(count),
        IcSource::Train => exp.train_ics(count),
    }
}

fn spread(ics: &[AgentState64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for ic in ics {
        let x = &ic.positions;
        let n = x.len() / d;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(distance(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]));
            }
        }
    }
    worst
}

/// True-system trajectories on `[0, T̃]`.
pub fn simulate_cmd(exp: &Experiment, source: IcSource, out: &Path) -> Result<PathBuf, CliError> {
    let ics = ics_for(exp, source)?;
    let text = simulate_paths(exp, &exp.spec, &ics, &exp.test_times())?;
    write_file(out, "simulate.csv", &text)
}

/// Learned-system trajectories on `[0, T̃]`; the true system without a basis.
pub fn forecast_cmd(exp: &Experiment, basis_path: Option<&Path>, source: IcSource, out: &Path) -> Result<PathBuf, CliError> {
    let ics = ics_for(exp, source)?;
    let spec = match basis_path {
        Some(p) => {
            let basis = stage("basis", read_basis::<f64>(&read_file(p)?))?;
            let table = table_for(exp, 2.0 * spread(&ics, exp.cfg.d));
            model_from_basis(exp, basis, "model", table)?.learned
        }
        None => exp.spec.clone(),
    };
    let text = simulate_paths(exp, &spec, &ics, &exp.test_times())?;
    write_file(out, "forecast.csv", &text)
}

/// HTP at every sparsity of `sweep.s_list` on shared data and features.
pub fn sweep_sparsity(exp: &Experiment, out: &Path) -> Result<ErrorReport, CliError> {
    let total = exp.cfg.total_features();
    if let Some(&s) = exp.cfg.s_list.iter().find(|&&s| s > total) {
        return Err(CliError::Config(ConfigError {
            key: "sweep.s_list".into(),
            origin: None,
            message: format!("sparsity {s} exceeds the {total} features"),
        }));
    }
    let prep = prepare(exp)?;
    let table = table_for(exp, prep.density.r_max());
    let times = exp.test_times();
    let ics = exp.test_ics(exp.cfg.test_ics)?;
    let max_iters = match exp.cfg.solver {
        Solver::Htp { max_iters, .. } => max_iters,
        _ => 50,
    };
    let mut report = ErrorReport::new();
    echo_config(&mut report, &exp.cfg);
    record_data(&mut report, exp, &prep);
    let mut csv = String::from("s,kernel_rel_err,path_mean,path_std\n");
    let mut failure = None;
    for &s in &exp.cfg.s_list {
        note(format!("sparsity {s}"));
        let label = format!("s{s}");
        let model = train(exp, &prep.system, &prep.basis, Solver::Htp { sparsity: s, max_iters }, &label, table)?;
        record_model(&mut report, exp, &model, Some(&prep.data));
        let ke = kernel_errors(exp, &model.basis, &prep.density)?;
        let rel = ke.relative.map_or("undefined".to_string(), format_num);
        record_kernel_errors(&mut report, &label, &ke, exp.cfg.class.is_heterogeneous());
        match path_error(exp, &model.learned, &ics, &times) {
            Ok(pe) => {
                let _ = writeln!(csv, "{s},{rel},{},{}", format_num(pe.mean), format_num(pe.std));
                record_path_error(&mut report, &label, &pe);
            }
            Err(e) => {
                let _ = writeln!(csv, "{s},{rel},failed,failed");
                report.set(format!("{label}.path_failed"), e.to_string());
                failure.get_or_insert(e);
            }
        }
    }
    write_file(out, "sweep_sparsity.csv", &csv)?;
    write_file(out, "sweep_sparsity.txt", &report.render())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Radial against random Fourier features on one dataset and budget.
pub fn compare_rff(exp: &Experiment, out: &Path) -> Result<ErrorReport, CliError> {
    if exp.cfg.class != SystemClass::FirstOrderHomogeneous {
        return Err(CliError::Stage {
            stage: "compare-rff",
            source: Error::Config("the feature comparison needs a first-order homogeneous system".into()),
        });
    }
    let data = training_data(exp)?;
    let density = pipeline::densities(exp)?;
    let mut report = ErrorReport::new();
    echo_config(&mut report, &exp.cfg);
    report.set("density.samples", density.samples());
    let grid = curve_grid(exp, density.all(), density.all());
    for (name, fourier) in [("radial", false), ("fourier", true)] {
        let basis = make_basis(exp, fourier)?;
        report.set(format!("{name}.data_checksum"), format!("{:016x}", data.checksum()));
        let sys = pipeline::compress(exp, &data, &basis)?;
        let model = train(exp, &sys, &basis, exp.cfg.solver, name, None::<Tabulation<f64>>)?;
        record_model(&mut report, exp, &model, Some(&data));
        let ke = kernel_errors(exp, &model.basis, &density)?;
        record_kernel_errors(&mut report, name, &ke, false);
        let g = learned_kernel(&model.basis, 0, 0)?;
        write_file(out, &format!("kernel_{name}.csv"), &write_kernel_curve(&grid, exp.spec.kernel(0, 0), &g, density.all()))?;
    }
    write_file(out, "compare_rff.txt", &report.render())?;
    Ok(report)
}
