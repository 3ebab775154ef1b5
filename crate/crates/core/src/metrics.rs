//! Training risk, `L²(ρ)` kernel errors and path-wise forecast errors.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::datagen::RadialDensity;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::integrate::{integrate, IntegratorSettings};
use crate::scalar::Real;
use crate::systems::{distance, AgentState, Kernel, SystemSpec};

/// `‖V − Ac‖² / samples`, where `samples = n · J_used · L`.
pub fn empirical_risk<T: Real>(a: &FeatureMatrix<T>, v: &[T], c: &[T], samples: usize) -> Result<T> {
    if v.len() != a.rows || c.len() != a.cols {
        return Err(Error::Config("matrix, target and coefficient dimensions disagree".into()));
    }
    if samples == 0 {
        return Err(Error::Config("risk normalization needs at least one sample".into()));
    }
    let pred = a.apply(c);
    let s: T = v.iter().zip(&pred).map(|(&y, &p)| (y - p) * (y - p)).sum();
    Ok(s / T::from_count(samples))
}

/// Risk from a residual norm: `residual² / samples`.
pub fn risk_from_residual<T: Real>(residual_norm: T, samples: usize) -> T {
    residual_norm * residual_norm / T::from_count(samples.max(1))
}

/// `‖G′ − G′_N‖_{L²(ρ)}` with `G′(r) = g(r) r`, by midpoint quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelError<T> {
    pub absolute: T,
    /// `None` when `‖G′‖_{L²(ρ)} = 0`.
    pub relative: Option<T>,
    pub reference_norm: T,
    /// Bins skipped because the true kernel would be clamped there.
    pub excluded_bins: usize,
    /// The density carried no samples.
    pub empty_density: bool,
}

impl<T: Real> KernelError<T> {
    pub fn relative_is_undefined(&self) -> bool {
        self.relative.is_none()
    }
}

pub fn kernel_l2_rho_error<T: Real>(g_true: &Kernel<T>, g_learned: &Kernel<T>, rho: &RadialDensity<T>) -> Result<KernelError<T>> {
    let mut abs2 = T::zero();
    let mut ref2 = T::zero();
    let mut excluded = 0;
    for (r, &m) in rho.midpoints().into_iter().zip(&rho.mass) {
        if m == T::zero() {
            continue;
        }
        let (gt, clamped) = g_true.eval_guarded(r);
        if clamped {
            excluded += 1;
            continue;
        }
        let gl = g_learned.eval(r)?;
        let diff = (gt - gl) * r;
        abs2 += m * diff * diff;
        ref2 += m * (gt * r) * (gt * r);
    }
    let absolute = abs2.sqrt();
    let reference_norm = ref2.sqrt();
    let relative = (reference_norm > T::zero()).then(|| absolute / reference_norm);
    Ok(KernelError { absolute, relative, reference_norm, excluded_bins: excluded, empty_density: rho.is_empty() })
}

/// Summary of a path-wise error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PathError<T> {
    pub mean: T,
    /// Sample standard deviation (`M − 1` denominator; zero for one trial).
    pub std: T,
    /// Per-trial maxima of the kept trials, in trial order.
    pub trials: Vec<T>,
    pub dropped: usize,
}

/// Largest per-agent position discrepancy over all frames.
fn max_discrepancy<T: Real>(a: &[T], b: &[T], frame: usize, n: usize, d: usize) -> T {
    let mut worst = T::zero();
    for (fa, fb) in a.chunks(frame).zip(b.chunks(frame)) {
        for i in 0..n {
            let e = distance(&fa[i * d..(i + 1) * d], &fb[i * d..(i + 1) * d]);
            if e > worst || e.is_nan() {
                worst = e;
            }
        }
    }
    worst
}

/// Path-wise error `E_{x₀}[max_{t, i} ‖x_i(t) − x̃_i(t)‖]` estimated from the
/// supplied initial conditions. Trials where either integration fails are
/// dropped; more than 20% dropped trials is an error. Trials run in fixed
/// chunks so that a hopeless model is abandoned early.
pub fn pathwise_error<T: Real>(
    spec_true: &SystemSpec<T>,
    spec_learned: &SystemSpec<T>,
    ics: &[AgentState<T>],
    times: &[T],
    settings: &IntegratorSettings<T>,
) -> Result<PathError<T>> {
    if spec_true.class != spec_learned.class || spec_true.d != spec_learned.d || spec_true.n != spec_learned.n {
        return Err(Error::Config("path-wise error needs two systems of the same class and size".into()));
    }
    if ics.is_empty() {
        return Err(Error::Config("path-wise error needs at least one trial".into()));
    }
    let (n, d) = (spec_true.n, spec_true.d);
    let frame = spec_true.state_len();
    let trial = |ic: &AgentState<T>| -> Result<T> {
        let y0 = ic.to_vector(spec_true)?;
        let a = integrate(spec_true, T::zero(), &y0, times, settings)?;
        let b = integrate(spec_learned, T::zero(), &y0, times, settings)?;
        let e = max_discrepancy(&a.states, &b.states, frame, n, d);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Numerical("non-finite discrepancy".into()))
        }
    };
    let allowed = ics.len() / 5;
    let mut trials = Vec::with_capacity(ics.len());
    let mut dropped = 0;
    let mut first_failure: Option<(usize, Error)> = None;
    for (c, chunk) in ics.chunks(PATH_CHUNK).enumerate() {
        let runs: Vec<Result<T>> = chunk.par_iter().map(trial).collect();
        for (k, r) in runs.into_iter().enumerate() {
            match r {
                Ok(e) => trials.push(e),
                Err(e) => {
                    dropped += 1;
                    first_failure.get_or_insert((c * PATH_CHUNK + k, e));
                }
            }
        }
        if dropped > allowed {
            let (index, e) = first_failure.expect("a failure was counted");
            return Err(Error::Numerical(format!(
                "more than {allowed} of {} path-wise trials failed; trial {index}: {e}",
                ics.len()
            )));
        }
    }
    let (mean, std) = mean_std(&trials);
    Ok(PathError { mean, std, trials, dropped })
}

const PATH_CHUNK: usize = 8;

pub fn mean_std<T: Real>(x: &[T]) -> (T, T) {
    if x.is_empty() {
        return (T::zero(), T::zero());
    }
    let m = T::from_count(x.len());
    let mean = x.iter().copied().sum::<T>() / m;
    if x.len() < 2 {
        return (mean, T::zero());
    }
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (m - T::one());
    (mean, var.sqrt())
}

/// Flat `key=value` report, one metric per line, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub entries: Vec<(String, String)>,
}

impl ErrorReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn set_num<T: Real>(&mut self, key: impl Into<String>, value: T) {
        self.set(key, format_num(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Records a kernel error under `prefix`; an undefined relative error is
    /// written as `undefined` with a flag.
    pub fn set_kernel_error<T: Real>(&mut self, prefix: &str, e: &KernelError<T>) {
        self.set_num(format!("{prefix}_abs"), e.absolute);
        match e.relative {
            Some(r) => self.set_num(format!("{prefix}_rel"), r),
            None => self.set(format!("{prefix}_rel"), "undefined"),
        }
        self.set(format!("{prefix}_zero_reference"), e.relative.is_none());
        if e.excluded_bins > 0 {
            self.set(format!("{prefix}_excluded_bins"), e.excluded_bins);
        }
        if e.empty_density {
            self.set(format!("{prefix}_empty_density"), true);
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = ErrorReport::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: no + 1, message: format!("expected key=value, got `{line}`") })?;
            r.set(k.trim(), v.trim());
        }
        Ok(r)
    }
}

/// Shortest decimal form that round-trips.
pub fn format_num<T: Real>(x: T) -> String {
    format!("{:e}", x.to_f64_lossy())
}
