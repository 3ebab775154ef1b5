//! Training and evaluation stages shared by the subcommands.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use radial_kernels::datagen::{
    apply_multiplicative_noise, differentiate_observed_velocities, empirical_radial_density, estimate_accelerations,
    estimate_velocities_central_difference, generate_dataset, pair_type_densities, sample_initial_conditions, simulate,
    uniform_times, Bins, InitialConditionLaw, PairDensities,
};
use radial_kernels::features::{build_learned_system, stream_rows, ColumnGroup, FeatureBasis, RowOptions, Tabulation};
use radial_kernels::linalg::{QrAccumulator, ReducedSystem};
use radial_kernels::metrics::{kernel_l2_rho_error, pathwise_error, risk_from_residual, ErrorReport, KernelError, PathError};
use radial_kernels::seeds::{stream_seed, Stream};
use radial_kernels::solvers::{Solver, SolverKind};
use radial_kernels::{
    AgentState64, Error, FeatureBasis64, InitialConditionLaw64, Kernel, KernelKind, RadialDensity64, ReducedSystem64,
    SolveReport64, SystemSpec, SystemSpec64, TrajectorySet64,
};

use crate::config::{ExperimentConfig, Observation};
use crate::CliError;

static VERBOSE: AtomicBool = AtomicBool::new(false);

pub fn set_verbose(on: bool) {
    VERBOSE.store(on, Ordering::Relaxed);
}

pub(crate) fn note(msg: impl AsRef<str>) {
    if VERBOSE.load(Ordering::Relaxed) {
        eprintln!("rfk: {}", msg.as_ref());
    }
}

pub(crate) fn stage<V>(name: &'static str, r: radial_kernels::Result<V>) -> Result<V, CliError> {
    r.map_err(|source| CliError::Stage { stage: name, source })
}

/// Seeds of the named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub train: u64,
    pub noise: u64,
    pub frequencies: u64,
    pub test: u64,
    pub density: u64,
    pub rff: u64,
    pub test_noise: u64,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Seeds {
            train: stream_seed(master, Stream::TrainIcs),
            noise: stream_seed(master, Stream::Noise),
            frequencies: stream_seed(master, Stream::Frequencies),
            test: stream_seed(master, Stream::TestIcs),
            density: stream_seed(master, Stream::DensityIcs),
            rff: stream_seed(master, Stream::Rff),
            test_noise: stream_seed(master, Stream::Other(1)),
        }
    }
}

/// A validated configuration with its true system.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub spec: SystemSpec64,
    pub law: InitialConditionLaw64,
    pub seeds: Seeds,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, CliError> {
        let spec = if cfg.class.is_heterogeneous() {
            let k = &cfg.kernels;
            SystemSpec::heterogeneous(
                cfg.d,
                SystemSpec::<f64>::two_type_labels(cfg.counts[0], cfg.counts[1]),
                [[k[0].clone(), k[1].clone()], [k[2].clone(), k[3].clone()]],
            )
        } else {
            SystemSpec::homogeneous(cfg.class, cfg.d, cfg.counts[0], cfg.kernels[0].clone())
        };
        let spec = stage("system", spec)?;
        let mut law = if cfg.class.is_heterogeneous() {
            InitialConditionLaw::per_type(cfg.positions[0].clone(), cfg.positions[1].clone())
        } else {
            InitialConditionLaw::new(cfg.positions[0].clone())
        };
        if let Some(v) = &cfg.velocities {
            law = law.with_velocities(v.clone());
        }
        stage("initial conditions", law.validate(&spec))?;
        stage("integrator", cfg.integrator.validate())?;
        let seeds = Seeds::new(cfg.seed);
        Ok(Experiment { cfg, spec, law, seeds })
    }

    pub fn row_options(&self) -> RowOptions {
        RowOptions { include_boundary: self.cfg.include_boundary, ..RowOptions::default() }
    }

    /// Number of agent-velocity samples behind the empirical risk.
    pub fn samples(&self, data: &TrajectorySet64) -> usize {
        data.num_trajectories() * data.training_steps(self.cfg.include_boundary).len() * data.n
    }

    /// Forecast grid on `[0, T̃]`.
    pub fn test_times(&self) -> Vec<f64> {
        let c = &self.cfg;
        let count = if c.test_steps > 0 {
            c.test_steps
        } else {
            ((c.timestamps - 1) as f64 * c.t_tilde / c.t_end).round() as usize + 1
        };
        uniform_times(c.t_tilde, count.max(2))
    }

    /// Last grid index inside the training window.
    pub fn transition_step(&self, times: &[f64]) -> usize {
        let limit = self.cfg.t_end * (1.0 + 1e-9);
        times.iter().rposition(|&t| t <= limit).unwrap_or(0)
    }

    /// Fresh test initial conditions, optionally perturbed like observations.
    pub fn test_ics(&self, count: usize) -> Result<Vec<AgentState64>, CliError> {
        let ics = stage("test initial conditions", sample_initial_conditions(&self.law, count, &self.spec, self.seeds.test))?;
        if !self.cfg.noisy_test_ics || self.cfg.noise == 0.0 {
            return Ok(ics);
        }
        let snap = stage("test initial conditions", simulate(&self.spec, &ics, &[0.0], &self.cfg.integrator, self.seeds.test))?;
        let noisy = stage("test initial conditions", apply_multiplicative_noise(&snap, self.cfg.noise, self.seeds.test_noise))?;
        Ok((0..count)
            .map(|l| {
                let x = noisy.frame(l, 0).to_vec();
                match noisy.velocity_frame(l, 0) {
                    Some(v) => AgentState64::with_velocities(x, v.to_vec()),
                    None => AgentState64::new(x),
                }
            })
            .collect())
    }

    /// The first `count` training initial conditions.
    pub fn train_ics(&self, count: usize) -> Result<Vec<AgentState64>, CliError> {
        stage("training initial conditions", sample_initial_conditions(&self.law, count, &self.spec, self.seeds.train))
    }
}

/// Noisy observations with derivative estimates.
pub fn training_data(exp: &Experiment) -> Result<TrajectorySet64, CliError> {
    let c = &exp.cfg;
    note(format!("simulating {} training trajectories", c.trajectories));
    let clean = stage(
        "training data",
        generate_dataset(&exp.spec, &exp.law, c.trajectories, c.timestamps, c.t_end, &c.integrator, exp.seeds.train),
    )?;
    let noisy = stage("observation noise", apply_multiplicative_noise(&clean, c.noise, exp.seeds.noise))?;
    let est = if c.class.is_second_order() {
        match c.observation {
            Observation::Positions => estimate_accelerations(&noisy),
            Observation::State => differentiate_observed_velocities(&noisy),
        }
    } else {
        estimate_velocities_central_difference(&noisy)
    };
    stage("derivative estimation", est)
}

/// Radial (or Fourier) basis from the frequency stream.
pub fn make_basis(exp: &Experiment, fourier: bool) -> Result<FeatureBasis64, CliError> {
    let c = &exp.cfg;
    let n = c.n();
    let b = if fourier {
        FeatureBasis::fourier(c.theta, c.theta_reading, c.features[0][0], n, exp.seeds.rff)
    } else if c.class.is_heterogeneous() {
        FeatureBasis::heterogeneous(c.theta, c.theta_reading, c.features, n, exp.seeds.frequencies)
    } else {
        FeatureBasis::homogeneous(c.class, c.theta, c.theta_reading, c.features[0][0], n, exp.seeds.frequencies)
    };
    stage("features", b)
}

fn compress_group(
    data: &TrajectorySet64,
    basis: &FeatureBasis64,
    group: ColumnGroup,
    cols: usize,
    opts: &RowOptions,
) -> radial_kernels::Result<ReducedSystem64> {
    let mut acc = QrAccumulator::new(cols);
    stream_rows(data, basis, group, opts, |a, v, _| acc.push(a, v))?;
    acc.finish()
}

/// Triangular reduction of the regression problem. Typed systems split into
/// one independent problem per agent type.
pub fn compress(exp: &Experiment, data: &TrajectorySet64, basis: &FeatureBasis64) -> Result<ReducedSystem64, CliError> {
    let opts = exp.row_options();
    note(format!("assembling and reducing {} feature columns", basis.len()));
    if !exp.cfg.class.is_heterogeneous() {
        return stage("assembly", compress_group(data, basis, ColumnGroup::All, basis.len(), &opts));
    }
    let mut parts = Vec::new();
    for a in 0..2 {
        let (b0, b1) = (basis.block(a, 0), basis.block(a, 1));
        let cols = b0.len + b1.len;
        if cols == 0 {
            continue;
        }
        parts.push((b0.offset, stage("assembly", compress_group(data, basis, ColumnGroup::Type(a), cols, &opts))?));
    }
    stage("assembly", ReducedSystem::block_diagonal(&parts, basis.len()))
}

/// Report label of a solver.
pub fn label(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Ols => "rre",
        SolverKind::Htp => "srre",
        other => other.as_str(),
    }
}

/// Solvers trained by `run`: the configured one, plus least squares when
/// the comparison is enabled.
pub fn solvers(cfg: &ExperimentConfig) -> Vec<Solver<f64>> {
    let mut out = Vec::new();
    if cfg.compare_rre_srre && cfg.solver.kind() != SolverKind::Ols {
        out.push(Solver::Ols);
    }
    out.push(cfg.solver);
    out
}

/// Trained coefficients together with the forecasting system.
#[derive(Debug, Clone)]
pub struct Model {
    pub label: String,
    pub report: SolveReport64,
    pub basis: FeatureBasis64,
    pub learned: SystemSpec64,
}

/// Range of the kernel table used for forecasting.
pub fn table_for(exp: &Experiment, r_hi: f64) -> Option<Tabulation<f64>> {
    (exp.cfg.tabulate && r_hi > 0.0 && r_hi.is_finite()).then(|| Tabulation { r_max: 1.5 * r_hi, nodes: exp.cfg.tabulate_nodes })
}

pub fn train(
    exp: &Experiment,
    sys: &ReducedSystem64,
    basis: &FeatureBasis64,
    solver: Solver<f64>,
    label: &str,
    table: Option<Tabulation<f64>>,
) -> Result<Model, CliError> {
    note(format!("solving with {}", solver.kind()));
    let report = stage("solver", solver.solve(sys, exp.cfg.rcond))?;
    let support = (solver.kind() == SolverKind::Htp).then(|| report.support.clone());
    let basis = stage("solver", basis.clone().with_coefficients(report.coefficients.clone(), support))?;
    let learned = stage("learned system", build_learned_system(&basis, &exp.spec, table))?;
    Ok(Model { label: label.to_string(), report, basis, learned })
}

/// Learned system from a stored basis.
pub fn model_from_basis(exp: &Experiment, basis: FeatureBasis64, name: &str, table: Option<Tabulation<f64>>) -> Result<Model, CliError> {
    if basis.coefficients.is_none() {
        return Err(CliError::Stage { stage: "basis", source: Error::State("basis file carries no coefficients".into()) });
    }
    let learned = stage("learned system", build_learned_system(&basis, &exp.spec, table))?;
    let c = basis.coefficients.clone().unwrap_or_default();
    let support: Vec<usize> = c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k).collect();
    let report = SolveReport64 {
        coefficients: c,
        support,
        residual_norm: f64::NAN,
        iterations: 0,
        converged: true,
        solver: SolverKind::Ols,
        rank_deficient: false,
        optimality: f64::NAN,
        threads: 1,
    };
    Ok(Model { label: name.to_string(), report, basis, learned })
}

/// Empirical pairwise-distance laws from clean trajectories.
#[derive(Debug, Clone)]
pub enum Densities {
    Homogeneous(RadialDensity64),
    Typed(PairDensities<f64>),
}

impl Densities {
    pub fn all(&self) -> &RadialDensity64 {
        match self {
            Densities::Homogeneous(r) => r,
            Densities::Typed(p) => &p.all,
        }
    }

    pub fn pair(&self, a: usize, b: usize) -> &RadialDensity64 {
        match self {
            Densities::Homogeneous(r) => r,
            Densities::Typed(p) => &p.by_type[a][b],
        }
    }

    pub fn samples(&self) -> u64 {
        self.all().samples
    }

    /// Largest observed distance.
    pub fn r_max(&self) -> f64 {
        let r = self.all();
        if r.is_empty() {
            0.0
        } else {
            r.support().1
        }
    }
}

pub fn densities(exp: &Experiment) -> Result<Densities, CliError> {
    let c = &exp.cfg;
    note(format!("simulating {} trajectories for the radial density", c.density_trajectories));
    let traj = stage(
        "density",
        generate_dataset(&exp.spec, &exp.law, c.density_trajectories, c.timestamps, c.t_end, &c.integrator, exp.seeds.density),
    )?;
    let bins = Bins::Count(c.density_bins);
    if c.class.is_heterogeneous() {
        Ok(Densities::Typed(stage("density", pair_type_densities(&traj, &bins))?))
    } else {
        Ok(Densities::Homogeneous(stage("density", empirical_radial_density(&traj, &bins))?))
    }
}

/// Type pairs `(a, b)` of the system.
pub fn pairs(exp: &Experiment) -> Vec<(usize, usize)> {
    if exp.cfg.class.is_heterogeneous() {
        vec![(0, 0), (0, 1), (1, 0), (1, 1)]
    } else {
        vec![(0, 0)]
    }
}

/// Untabulated learned kernel of block `(a, b)`.
pub fn learned_kernel(basis: &FeatureBasis64, a: usize, b: usize) -> Result<Kernel<f64>, CliError> {
    let k = stage("learned system", basis.learned_kernel(a, b))?;
    Ok(if k.terms() == 0 { Kernel::zero() } else { Kernel::new(KernelKind::Learned(Arc::new(k))) })
}

/// Per-pair kernel errors and their aggregate.
#[derive(Debug, Clone)]
pub struct KernelErrors {
    pub pairs: Vec<((usize, usize), KernelError<f64>)>,
    pub absolute: f64,
    pub relative: Option<f64>,
}

pub fn kernel_errors(exp: &Experiment, basis: &FeatureBasis64, rho: &Densities) -> Result<KernelErrors, CliError> {
    let mut out = Vec::new();
    let (mut abs2, mut ref2) = (0.0, 0.0);
    for (a, b) in pairs(exp) {
        let g = learned_kernel(basis, a, b)?;
        let e = stage("kernel error", kernel_l2_rho_error(exp.spec.kernel(a, b), &g, rho.pair(a, b)))?;
        abs2 += e.absolute * e.absolute;
        ref2 += e.reference_norm * e.reference_norm;
        out.push(((a, b), e));
    }
    let absolute = abs2.sqrt();
    let relative = (ref2 > 0.0).then(|| absolute / ref2.sqrt());
    Ok(KernelErrors { pairs: out, absolute, relative })
}

pub fn path_error(exp: &Experiment, learned: &SystemSpec64, ics: &[AgentState64], times: &[f64]) -> Result<PathError<f64>, CliError> {
    note(format!("forecasting {} test trajectories to t = {}", ics.len(), exp.cfg.t_tilde));
    stage("path-wise error", pathwise_error(&exp.spec, learned, ics, times, &exp.cfg.integrator))
}

/// Writes the effective configuration (except the output directory).
pub fn echo_config(report: &mut ErrorReport, cfg: &ExperimentConfig) {
    for (k, v) in &cfg.echo {
        if k != "out" {
            report.set(format!("config.{k}"), v);
        }
    }
}

pub fn record_model(report: &mut ErrorReport, exp: &Experiment, m: &Model, data: Option<&TrajectorySet64>) {
    let p = &m.label;
    report.set(format!("{p}.solver"), m.report.solver);
    report.set(format!("{p}.support_size"), m.report.support.len());
    report.set(format!("{p}.iterations"), m.report.iterations);
    report.set(format!("{p}.converged"), m.report.converged);
    report.set(format!("{p}.rank_deficient"), m.report.rank_deficient);
    report.set_num(format!("{p}.optimality"), m.report.optimality);
    report.set_num(format!("{p}.residual_norm"), m.report.residual_norm);
    if let Some(data) = data {
        report.set_num(format!("{p}.empirical_risk"), risk_from_residual(m.report.residual_norm, exp.samples(data)));
    }
}

pub fn record_kernel_errors(report: &mut ErrorReport, label: &str, e: &KernelErrors, typed: bool) {
    if typed {
        for ((a, b), k) in &e.pairs {
            report.set_kernel_error(&format!("{label}.kernel_{}{}", a + 1, b + 1), k);
        }
    } else if let Some((_, k)) = e.pairs.first() {
        report.set_kernel_error(&format!("{label}.kernel"), k);
        return;
    }
    report.set_num(format!("{label}.kernel_abs"), e.absolute);
    match e.relative {
        Some(r) => report.set_num(format!("{label}.kernel_rel"), r),
        None => report.set(format!("{label}.kernel_rel"), "undefined"),
    }
}

pub fn record_path_error(report: &mut ErrorReport, label: &str, e: &PathError<f64>) {
    report.set_num(format!("{label}.path_mean"), e.mean);
    report.set_num(format!("{label}.path_std"), e.std);
    report.set(format!("{label}.path_trials"), e.trials.len());
    report.set(format!("{label}.path_dropped"), e.dropped);
}

/// Everything `run` and the sweeps share: observations, reduction and density.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: TrajectorySet64,
    pub checksum: u64,
    pub basis: FeatureBasis64,
    pub system: ReducedSystem64,
    pub density: Densities,
}

pub fn prepare(exp: &Experiment) -> Result<Prepared, CliError> {
    let data = training_data(exp)?;
    let checksum = data.checksum();
    let basis = make_basis(exp, exp.cfg.fourier)?;
    let system = compress(exp, &data, &basis)?;
    let density = densities(exp)?;
    Ok(Prepared { data, checksum, basis, system, density })
}

pub fn record_data(report: &mut ErrorReport, exp: &Experiment, p: &Prepared) {
    report.set("data.checksum", format!("{:016x}", p.checksum));
    report.set("data.samples", exp.samples(&p.data));
    report.set("data.rows", p.system.rows);
    report.set("data.boundary_margin", p.data.boundary_margin);
    report.set("data.flagged_integrations", p.data.stats.iter().filter(|s| s.flagged).count());
    report.set("density.samples", p.density.samples());
    let (lo, hi) = if p.density.all().is_empty() { (0.0, 0.0) } else { p.density.all().support() };
    report.set_num("density.r_min", lo);
    report.set_num("density.r_max", hi);
    report.set("basis.N", p.basis.len());
    report.set("basis.family", if exp.cfg.fourier { "fourier" } else { "radial" });
}
