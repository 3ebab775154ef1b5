//! `key = value` experiment files with `[section]` headers.
//!
//! Keys inside a section are addressed as `section.key`. A `preset` key (or
//! `--preset`) seeds every field from a built-in table; later file lines and
//! `--set` overrides replace individual values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use radial_kernels::datagen::IcKind;
use radial_kernels::features::ThetaReading;
use radial_kernels::integrate::{IntegratorSettings, Method};
use radial_kernels::solvers::{Solver, SolverKind};
use radial_kernels::{Kernel, KernelKind, SystemClass};

use crate::presets;

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Default,
    Preset(String),
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::Preset(p) => write!(f, "preset {p}"),
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Override => f.write_str("command-line override"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub origin: Option<Origin>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(o) => write!(f, "`{}` ({o}): {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, origin: Option<&Origin>, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), origin: origin.cloned(), message: message.into() }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "lennard-jones | cucker-smale | predator-prey | sheep-food"),
    ("seed", "master seed (u64)"),
    ("out", "output directory"),
    ("system.class", "first-order-homogeneous | first-order-heterogeneous | second-order-homogeneous"),
    ("system.d", "spatial dimension"),
    ("system.n", "agent count (homogeneous)"),
    ("system.n1", "type-1 agent count (heterogeneous)"),
    ("system.n2", "type-2 agent count (heterogeneous)"),
    ("system.kernel", "kernel of a homogeneous system"),
    ("system.kernel_11", "influence of type 1 on type 1"),
    ("system.kernel_12", "influence of type 2 on type 1"),
    ("system.kernel_21", "influence of type 1 on type 2"),
    ("system.kernel_22", "influence of type 2 on type 2"),
    ("system.domain_floor", "radius below which kernels are evaluated at the floor"),
    ("initial.positions", "position law (homogeneous)"),
    ("initial.positions_1", "position law of type-1 agents"),
    ("initial.positions_2", "position law of type-2 agents"),
    ("initial.velocities", "velocity law (second order)"),
    ("data.L", "training trajectories"),
    ("data.L_prime", "trajectories for the empirical radial density"),
    ("data.J", "timestamps per trajectory"),
    ("data.T", "training horizon"),
    ("data.T_tilde", "forecast horizon (>= T)"),
    ("data.noise", "multiplicative noise level"),
    ("data.observation", "positions | state: second-order targets from positions only or from observed velocities"),
    ("data.include_boundary", "also train on the one-sided derivative estimates at both ends"),
    ("data.test_steps", "timestamps on [0, T_tilde] for path-wise errors (0: training spacing)"),
    ("data.density_bins", "histogram bins of the radial density"),
    ("features.N", "feature count (homogeneous)"),
    ("features.N_11", "features of block (1,1)"),
    ("features.N_12", "features of block (1,2)"),
    ("features.N_21", "features of block (2,1)"),
    ("features.N_22", "features of block (2,2)"),
    ("features.theta", "frequency law parameter"),
    ("features.theta_reading", "variance | stddev"),
    ("features.family", "radial | fourier"),
    ("solver.method", "ols | ridge | htp | nnls"),
    ("solver.sparsity", "HTP sparsity s"),
    ("solver.max_iters", "HTP iteration cap H"),
    ("solver.nnls_max_iters", "NNLS outer iteration cap (0: 3 max(N, 10))"),
    ("solver.lambda", "ridge penalty"),
    ("solver.rcond", "relative singular-value cutoff (0: max(rows, cols) eps)"),
    ("solver.compare_rre_srre", "also train the least-squares model next to the configured solver"),
    ("integrator.method", "rk45 | rk4"),
    ("integrator.step", "fixed step for rk4"),
    ("integrator.rel_tol", "relative tolerance"),
    ("integrator.abs_tol", "absolute tolerance"),
    ("integrator.max_step", "largest adaptive step (inf: unbounded)"),
    ("integrator.max_steps", "step budget per trajectory"),
    ("integrator.rejection_flag_ratio", "rejected/accepted ratio above which runs are flagged"),
    ("evaluation.M", "test initial conditions for path-wise errors"),
    ("evaluation.noisy_test_ics", "perturb test initial conditions with the observation noise"),
    ("evaluation.tabulate", "forecast with tabulated learned kernels"),
    ("evaluation.tabulate_nodes", "nodes of the kernel table"),
    ("evaluation.curve_points", "radii in kernel-curve exports"),
    ("evaluation.forecast_count", "test trajectories written by run and forecast"),
    ("sweep.s_list", "comma-separated sparsity levels for sweep-sparsity"),
];

const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("out", "out"),
    ("system.domain_floor", "1e-6"),
    ("data.observation", "positions"),
    ("data.include_boundary", "false"),
    ("data.test_steps", "0"),
    ("data.density_bins", "200"),
    ("features.theta_reading", "variance"),
    ("features.family", "radial"),
    ("solver.method", "htp"),
    ("solver.max_iters", "50"),
    ("solver.nnls_max_iters", "0"),
    ("solver.lambda", "0"),
    ("solver.rcond", "0"),
    ("solver.compare_rre_srre", "true"),
    ("integrator.method", "rk45"),
    ("integrator.step", "0.01"),
    ("integrator.rel_tol", "1e-5"),
    ("integrator.abs_tol", "1e-6"),
    ("integrator.max_step", "inf"),
    ("integrator.max_steps", "1000000"),
    ("integrator.rejection_flag_ratio", "0.5"),
    ("evaluation.M", "50"),
    ("evaluation.noisy_test_ics", "false"),
    ("evaluation.tabulate", "true"),
    ("evaluation.tabulate_nodes", "20001"),
    ("evaluation.curve_points", "400"),
    ("evaluation.forecast_count", "3"),
    ("sweep.s_list", "10,40,80,150"),
];

/// Key/value store with provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn get(&self, key: &str) -> Option<(&str, &Origin)> {
        self.entries.get(key).map(|(v, o)| (v.as_str(), o))
    }

    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(err(key, Some(&origin), "unknown key"));
        }
        if key == "preset" {
            let table = presets::preset(value).ok_or_else(|| err(key, Some(&origin), format!("unknown preset `{value}`")))?;
            for (k, v) in table {
                self.entries.insert(k.to_string(), (v.to_string(), Origin::Preset(value.to_string())));
            }
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    /// Effective values in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, (v, _))| (k.as_str(), v.as_str()))
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, item: &str) -> Result<(), ConfigError> {
        let (k, v) = item.split_once('=').ok_or_else(|| err(item, Some(&Origin::Override), "expected key=value"))?;
        self.set(k.trim(), v.trim(), Origin::Override)
    }
}

/// Parses configuration text. A `preset` line is applied first wherever it
/// appears so that explicit lines always win.
pub fn parse_config(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    for (k, v) in DEFAULTS {
        raw.entries.insert(k.to_string(), (v.to_string(), Origin::Default));
    }
    let mut lines = Vec::new();
    let mut section = String::new();
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, Some(&Origin::Line(no)), "malformed section header"))?
                .trim();
            section = name.to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(line, Some(&Origin::Line(no)), "expected key = value"))?;
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        lines.push((key, v.trim().to_string(), no));
    }
    if let Some((_, v, no)) = lines.iter().find(|(k, _, _)| k == "preset") {
        raw.set("preset", v, Origin::Line(*no))?;
    }
    for (k, v, no) in &lines {
        if k != "preset" {
            raw.set(k, v, Origin::Line(*no))?;
        }
    }
    Ok(raw)
}

pub fn load_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(&path.display().to_string(), None, e.to_string()))?;
    parse_config(&text)
}

/// Configuration made only of defaults and a preset.
pub fn from_preset(name: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = parse_config("")?;
    raw.set("preset", name, Origin::Override)?;
    Ok(raw)
}

/// How the positions of one agent type are drawn in the file format.
pub fn parse_law(key: &str, origin: &Origin, s: &str, d: usize) -> Result<IcKind<f64>, ConfigError> {
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or("").trim();
    let args: Vec<f64> = parts
        .map(|p| p.trim().parse::<f64>().map_err(|_| err(key, Some(origin), format!("`{p}` is not a number"))))
        .collect::<Result<_, _>>()?;
    let center = |from: usize| -> Result<Vec<f64>, ConfigError> {
        match args.len() - from {
            0 => Ok(vec![0.0; d]),
            k if k == d => Ok(args[from..].to_vec()),
            _ => Err(err(key, Some(origin), format!("center needs {d} coordinates"))),
        }
    };
    let want = |lo: usize, hi: usize| -> Result<(), ConfigError> {
        if args.len() < lo || args.len() > hi {
            return Err(err(key, Some(origin), format!("`{name}` takes {lo} to {hi} parameters")));
        }
        Ok(())
    };
    let law = match name {
        "gaussian" => {
            want(0, 0)?;
            IcKind::GaussianStandard
        }
        "box" => {
            want(2, 2)?;
            IcKind::uniform_cube(args[0], args[1])
        }
        "ring" => {
            want(2, 2 + d)?;
            IcKind::UniformRing { r_min: args[0], r_max: args[1], center: center(2)? }
        }
        "disk" => {
            want(1, 1 + d)?;
            IcKind::UniformDisk { radius: args[0], center: center(1)? }
        }
        "heart" => {
            want(1, 1 + d)?;
            IcKind::HeartCurve { scale: args[0], center: center(1)? }
        }
        "strip" => {
            want(4, 4)?;
            IcKind::UniformStrip { x: (args[0], args[1]), y: (args[2], args[3]) }
        }
        other => return Err(err(key, Some(origin), format!("unknown law `{other}`"))),
    };
    law.validate(d).map_err(|e| err(key, Some(origin), e.to_string()))?;
    Ok(law)
}

pub fn parse_kernel(key: &str, origin: &Origin, s: &str) -> Result<Kernel<f64>, ConfigError> {
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or("").trim();
    let args: Vec<f64> = parts
        .map(|p| p.trim().parse::<f64>().map_err(|_| err(key, Some(origin), format!("`{p}` is not a number"))))
        .collect::<Result<_, _>>()?;
    let none = |k: KernelKind<f64>| -> Result<Kernel<f64>, ConfigError> {
        if args.is_empty() {
            Ok(Kernel::new(k))
        } else {
            Err(err(key, Some(origin), format!("`{name}` takes no parameters")))
        }
    };
    match name {
        "lennard-jones" => match args.len() {
            0 => Ok(Kernel::lennard_jones(10.0, 1.0)),
            2 => Ok(Kernel::lennard_jones(args[0], args[1])),
            _ => Err(err(key, Some(origin), "lennard-jones takes epsilon:sigma")),
        },
        "constant" => match args.len() {
            1 => Ok(Kernel::constant(args[0])),
            _ => Err(err(key, Some(origin), "constant takes one value")),
        },
        "cucker-smale" => none(KernelKind::CuckerSmale),
        "prey-prey" => none(KernelKind::PreyPrey),
        "prey-predator" => none(KernelKind::PreyPredator),
        "predator-prey" => none(KernelKind::PredatorPrey),
        "predator-predator" => none(KernelKind::PredatorPredator),
        "sheep-sheep" => none(KernelKind::SheepSheep),
        "sheep-food" => none(KernelKind::SheepFoodAttraction),
        "zero" => none(KernelKind::Zero),
        other => Err(err(key, Some(origin), format!("unknown kernel `{other}`"))),
    }
}

/// Observation reading for second-order systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// Velocities and accelerations from differences of observed positions.
    Positions,
    /// Observed velocities; accelerations from their differences.
    State,
}

/// Typed experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub out: String,
    pub class: SystemClass,
    pub d: usize,
    /// Agent counts per type (`[n, 0]` for homogeneous systems).
    pub counts: [usize; 2],
    pub kernels: Vec<Kernel<f64>>,
    pub positions: Vec<IcKind<f64>>,
    pub velocities: Option<IcKind<f64>>,
    pub trajectories: usize,
    pub density_trajectories: usize,
    pub timestamps: usize,
    pub t_end: f64,
    pub t_tilde: f64,
    pub noise: f64,
    pub observation: Observation,
    pub include_boundary: bool,
    pub test_steps: usize,
    pub density_bins: usize,
    /// Row-major 2×2 feature counts; homogeneous bases use `[0][0]`.
    pub features: [[usize; 2]; 2],
    pub theta: f64,
    pub theta_reading: ThetaReading,
    pub fourier: bool,
    pub solver: Solver<f64>,
    pub rcond: Option<f64>,
    pub compare_rre_srre: bool,
    pub integrator: IntegratorSettings<f64>,
    pub test_ics: usize,
    pub noisy_test_ics: bool,
    pub tabulate: bool,
    pub tabulate_nodes: usize,
    pub curve_points: usize,
    pub forecast_count: usize,
    pub s_list: Vec<usize>,
    /// Effective key/value pairs, echoed into reports.
    pub echo: Vec<(String, String)>,
}

struct Reader<'a>(&'a RawConfig);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<(&str, &Origin), ConfigError> {
        self.0.get(key).ok_or_else(|| err(key, None, "missing required key"))
    }

    fn parse<V: std::str::FromStr>(&self, key: &str, what: &str) -> Result<V, ConfigError> {
        let (v, o) = self.raw(key)?;
        v.parse().map_err(|_| err(key, Some(o), format!("`{v}` is not {what}")))
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        let v: usize = self.parse(key, "a non-negative integer")?;
        if v == 0 {
            return Err(err(key, self.0.get(key).map(|x| x.1), "must be at least 1"));
        }
        Ok(v)
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.parse(key, "a non-negative integer")
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.parse(key, "a number")?;
        if v.is_nan() {
            return Err(err(key, self.0.get(key).map(|x| x.1), "must not be NaN"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.f64(key)?;
        if !(v > 0.0) {
            return Err(err(key, self.0.get(key).map(|x| x.1), "must be positive"));
        }
        Ok(v)
    }

    fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        self.parse(key, "true or false")
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader(raw);
        let (class_s, class_o) = r.raw("system.class")?;
        let class: SystemClass = class_s.parse().map_err(|_| err("system.class", Some(class_o), format!("unknown class `{class_s}`")))?;
        let d = r.count("system.d")?;
        let het = class.is_heterogeneous();
        let counts = if het { [r.count("system.n1")?, r.count("system.n2")?] } else { [r.count("system.n")?, 0] };
        let floor = r.positive("system.domain_floor")?;
        let kernel = |key: &str| -> Result<Kernel<f64>, ConfigError> {
            let (v, o) = r.raw(key)?;
            Ok(parse_kernel(key, o, v)?.with_floor(floor))
        };
        let kernels = if het {
            vec![kernel("system.kernel_11")?, kernel("system.kernel_12")?, kernel("system.kernel_21")?, kernel("system.kernel_22")?]
        } else {
            vec![kernel("system.kernel")?]
        };
        let law = |key: &str| -> Result<IcKind<f64>, ConfigError> {
            let (v, o) = r.raw(key)?;
            parse_law(key, o, v, d)
        };
        let positions = if het { vec![law("initial.positions_1")?, law("initial.positions_2")?] } else { vec![law("initial.positions")?] };
        let velocities = if class.is_second_order() { Some(law("initial.velocities")?) } else { None };
        let timestamps = r.count("data.J")?;
        if timestamps < 5 {
            return Err(err("data.J", raw.get("data.J").map(|x| x.1), "at least five timestamps are required"));
        }
        let t_end = r.positive("data.T")?;
        let t_tilde = r.positive("data.T_tilde")?;
        if t_tilde < t_end {
            return Err(err("data.T_tilde", raw.get("data.T_tilde").map(|x| x.1), "forecast horizon must not be shorter than data.T"));
        }
        let noise = r.f64("data.noise")?;
        if !(0.0..1.0).contains(&noise) {
            return Err(err("data.noise", raw.get("data.noise").map(|x| x.1), "must lie in [0, 1)"));
        }
        let (obs_s, obs_o) = r.raw("data.observation")?;
        let observation = match obs_s {
            "positions" => Observation::Positions,
            "state" => Observation::State,
            other => return Err(err("data.observation", Some(obs_o), format!("unknown reading `{other}`"))),
        };
        let features = if het {
            [[r.usize("features.N_11")?, r.usize("features.N_12")?], [r.usize("features.N_21")?, r.usize("features.N_22")?]]
        } else {
            [[r.count("features.N")?, 0], [0, 0]]
        };
        let total: usize = features.iter().flatten().sum();
        if total == 0 {
            return Err(err("features.N_11", raw.get("features.N_11").map(|x| x.1), "at least one feature is required"));
        }
        let (reading_s, reading_o) = r.raw("features.theta_reading")?;
        let theta_reading = match reading_s {
            "variance" => ThetaReading::Variance,
            "stddev" => ThetaReading::StdDev,
            other => return Err(err("features.theta_reading", Some(reading_o), format!("unknown reading `{other}`"))),
        };
        let (fam_s, fam_o) = r.raw("features.family")?;
        let fourier = match fam_s {
            "radial" => false,
            "fourier" => {
                if class != SystemClass::FirstOrderHomogeneous {
                    return Err(err("features.family", Some(fam_o), "Fourier features need a first-order homogeneous system"));
                }
                true
            }
            other => return Err(err("features.family", Some(fam_o), format!("unknown family `{other}`"))),
        };
        let (m_s, m_o) = r.raw("solver.method")?;
        let kind: SolverKind = m_s.parse().map_err(|_| err("solver.method", Some(m_o), format!("unknown solver `{m_s}`")))?;
        let solver = match kind {
            SolverKind::Ols => Solver::Ols,
            SolverKind::Ridge => {
                let lambda = r.f64("solver.lambda")?;
                if lambda < 0.0 {
                    return Err(err("solver.lambda", raw.get("solver.lambda").map(|x| x.1), "must be non-negative"));
                }
                Solver::Ridge { lambda }
            }
            SolverKind::Htp => {
                let sparsity = r.count("solver.sparsity")?;
                if sparsity > total {
                    return Err(err("solver.sparsity", raw.get("solver.sparsity").map(|x| x.1), format!("exceeds the {total} features")));
                }
                Solver::Htp { sparsity, max_iters: r.count("solver.max_iters")? }
            }
            SolverKind::Nnls => {
                let k = r.usize("solver.nnls_max_iters")?;
                Solver::Nnls { max_iters: if k == 0 { 3 * total.max(10) } else { k } }
            }
        };
        let rcond = match r.f64("solver.rcond")? {
            v if v == 0.0 => None,
            v if v > 0.0 => Some(v),
            _ => return Err(err("solver.rcond", raw.get("solver.rcond").map(|x| x.1), "must be non-negative")),
        };
        let (im_s, im_o) = r.raw("integrator.method")?;
        let method = match im_s {
            "rk45" => Method::AdaptiveRK45,
            "rk4" => Method::FixedRK4 { step: r.positive("integrator.step")? },
            other => return Err(err("integrator.method", Some(im_o), format!("unknown method `{other}`"))),
        };
        let integrator = IntegratorSettings {
            rel_tol: r.positive("integrator.rel_tol")?,
            abs_tol: r.positive("integrator.abs_tol")?,
            max_step: r.positive("integrator.max_step")?,
            max_steps: r.count("integrator.max_steps")?,
            method,
            rejection_flag_ratio: r.positive("integrator.rejection_flag_ratio")?,
        };
        let (sl, so) = r.raw("sweep.s_list")?;
        let s_list = sl
            .split(',')
            .map(|t| t.trim().parse::<usize>().ok().filter(|&s| s >= 1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| err("sweep.s_list", Some(so), "entries must be positive integers"))?;
        let cfg = ExperimentConfig {
            preset: raw.get("preset").map(|(v, _)| v.to_string()),
            seed: r.parse("seed", "an unsigned integer")?,
            out: r.raw("out")?.0.to_string(),
            class,
            d,
            counts,
            kernels,
            positions,
            velocities,
            trajectories: r.count("data.L")?,
            density_trajectories: r.count("data.L_prime")?,
            timestamps,
            t_end,
            t_tilde,
            noise,
            observation,
            include_boundary: r.bool("data.include_boundary")?,
            test_steps: r.usize("data.test_steps")?,
            density_bins: r.count("data.density_bins")?,
            features,
            theta: r.positive("features.theta")?,
            theta_reading,
            fourier,
            solver,
            rcond,
            compare_rre_srre: r.bool("solver.compare_rre_srre")?,
            integrator,
            test_ics: r.count("evaluation.M")?,
            noisy_test_ics: r.bool("evaluation.noisy_test_ics")?,
            tabulate: r.bool("evaluation.tabulate")?,
            tabulate_nodes: r.usize("evaluation.tabulate_nodes")?,
            curve_points: r.count("evaluation.curve_points")?,
            forecast_count: r.usize("evaluation.forecast_count")?,
            s_list,
            echo: raw.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        };
        if cfg.tabulate && cfg.tabulate_nodes < 2 {
            return Err(err("evaluation.tabulate_nodes", raw.get("evaluation.tabulate_nodes").map(|x| x.1), "needs at least two nodes"));
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    pub fn total_features(&self) -> usize {
        self.features.iter().flatten().sum()
    }
}
