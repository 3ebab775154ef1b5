//! Interacting-agent systems: kernels, system descriptions and right-hand
//! sides for the first-order (homogeneous and two-type heterogeneous) and
//! second-order homogeneous classes.
//!
//! Positions are stored agent-major: agent `i` occupies `x[i*d..(i+1)*d]`.
//! Self-pairs are skipped; every unordered pair is visited once.

mod kernel;

pub use kernel::{
    kernel_from_potential, ConstantPotential, Kernel, KernelKind, LennardJonesPotential, Potential,
    PotentialKernelValue, QuadraticPotential, SampledPotential, TabulatedKernel,
    DEFAULT_DOMAIN_FLOOR,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrate::OdeSystem;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemClass {
    FirstOrderHomogeneous,
    FirstOrderHeterogeneous,
    SecondOrderHomogeneous,
}

impl SystemClass {
    pub fn is_second_order(self) -> bool {
        self == SystemClass::SecondOrderHomogeneous
    }

    pub fn is_heterogeneous(self) -> bool {
        self == SystemClass::FirstOrderHeterogeneous
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemClass::FirstOrderHomogeneous => "first-order-homogeneous",
            SystemClass::FirstOrderHeterogeneous => "first-order-heterogeneous",
            SystemClass::SecondOrderHomogeneous => "second-order-homogeneous",
        }
    }
}

impl fmt::Display for SystemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "first-order-homogeneous" => Ok(SystemClass::FirstOrderHomogeneous),
            "first-order-heterogeneous" => Ok(SystemClass::FirstOrderHeterogeneous),
            "second-order-homogeneous" => Ok(SystemClass::SecondOrderHomogeneous),
            other => Err(Error::Config(format!("unknown system class `{other}`"))),
        }
    }
}

/// Complete description of an interacting system.
///
/// `kernels` holds one kernel for homogeneous classes and the row-major grid
/// `[g11, g12, g21, g22]` for the heterogeneous class, where `g_ab` is the
/// influence of type-`b` agents on type-`a` agents. Type labels are 0-based
/// internally (`0` is type 1).
#[derive(Debug, Clone)]
pub struct SystemSpec<T: Real> {
    pub class: SystemClass,
    pub d: usize,
    pub n: usize,
    pub type_labels: Vec<usize>,
    pub kernels: Vec<Kernel<T>>,
}

impl<T: Real> SystemSpec<T> {
    pub fn first_order(d: usize, n: usize, kernel: Kernel<T>) -> Result<Self> {
        Self::homogeneous(SystemClass::FirstOrderHomogeneous, d, n, kernel)
    }

    pub fn second_order(d: usize, n: usize, kernel: Kernel<T>) -> Result<Self> {
        Self::homogeneous(SystemClass::SecondOrderHomogeneous, d, n, kernel)
    }

    pub fn homogeneous(class: SystemClass, d: usize, n: usize, kernel: Kernel<T>) -> Result<Self> {
        let spec = SystemSpec { class, d, n, type_labels: Vec::new(), kernels: vec![kernel] };
        spec.validate()?;
        Ok(spec)
    }

    /// Heterogeneous system from per-agent labels (0 or 1) and the 2×2 grid.
    pub fn heterogeneous(d: usize, type_labels: Vec<usize>, grid: [[Kernel<T>; 2]; 2]) -> Result<Self> {
        let [[g11, g12], [g21, g22]] = grid;
        let spec = SystemSpec {
            class: SystemClass::FirstOrderHeterogeneous,
            d,
            n: type_labels.len(),
            type_labels,
            kernels: vec![g11, g12, g21, g22],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Labels for `n1` agents of type 1 followed by `n2` of type 2.
    pub fn two_type_labels(n1: usize, n2: usize) -> Vec<usize> {
        std::iter::repeat_n(0, n1).chain(std::iter::repeat_n(1, n2)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::Config("dimension and agent count must be positive".into()));
        }
        match self.class {
            SystemClass::FirstOrderHeterogeneous => {
                if self.kernels.len() != 4 {
                    return Err(Error::Config("heterogeneous systems need exactly four kernels".into()));
                }
                if self.type_labels.len() != self.n {
                    return Err(Error::Config("one type label per agent is required".into()));
                }
                if self.type_labels.iter().any(|&t| t > 1) {
                    return Err(Error::Config("type labels must be 1 or 2".into()));
                }
            }
            _ => {
                if self.kernels.len() != 1 {
                    return Err(Error::Config("homogeneous systems need exactly one kernel".into()));
                }
                if !self.type_labels.is_empty() && self.type_labels.iter().any(|&t| t != 0) {
                    return Err(Error::Config("homogeneous systems carry a single agent type".into()));
                }
            }
        }
        Ok(())
    }

    /// Agents per type (`[n, 0]` for homogeneous systems).
    pub fn type_counts(&self) -> [usize; 2] {
        if self.class.is_heterogeneous() {
            let n2 = self.type_labels.iter().filter(|&&t| t == 1).count();
            [self.n - n2, n2]
        } else {
            [self.n, 0]
        }
    }

    #[inline]
    pub fn type_of(&self, agent: usize) -> usize {
        if self.class.is_heterogeneous() {
            self.type_labels[agent]
        } else {
            0
        }
    }

    /// Kernel for the influence of a `source`-type agent on a `target`-type agent.
    #[inline]
    pub fn kernel(&self, target: usize, source: usize) -> &Kernel<T> {
        if self.class.is_heterogeneous() {
            &self.kernels[2 * target + source]
        } else {
            &self.kernels[0]
        }
    }

    /// Length of the first-order state vector the integrator advances.
    pub fn state_len(&self) -> usize {
        if self.class.is_second_order() {
            2 * self.n * self.d
        } else {
            self.n * self.d
        }
    }

    /// Same system with different kernels (same class, dimension and labels).
    pub fn with_kernels(&self, kernels: Vec<Kernel<T>>) -> Result<Self> {
        let spec = SystemSpec { kernels, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    /// Writes `d/dt y` for the flattened state `y` into `dy`, returning the
    /// number of pair evaluations that were clamped to the domain floor.
    pub fn rhs_into(&self, y: &[T], dy: &mut [T]) -> usize {
        let (n, d) = (self.n, self.d);
        let nd = n * d;
        dy.iter_mut().for_each(|v| *v = T::zero());
        let mut clamped = 0;
        match self.class {
            SystemClass::FirstOrderHomogeneous => {
                let kernel = &self.kernels[0];
                let inv_n = T::from_count(n).recip();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let r = distance(&y[i * d..(i + 1) * d], &y[j * d..(j + 1) * d]);
                        let (g, c) = kernel.eval_guarded(r);
                        clamped += c as usize;
                        let w = g * inv_n;
                        for k in 0..d {
                            let diff = w * (y[j * d + k] - y[i * d + k]);
                            dy[i * d + k] += diff;
                            dy[j * d + k] -= diff;
                        }
                    }
                }
            }
            SystemClass::FirstOrderHeterogeneous => {
                let counts = self.type_counts();
                let inv = counts.map(|c| if c > 0 { T::from_count(c).recip() } else { T::zero() });
                for i in 0..n {
                    let ti = self.type_labels[i];
                    for j in (i + 1)..n {
                        let tj = self.type_labels[j];
                        let r = distance(&y[i * d..(i + 1) * d], &y[j * d..(j + 1) * d]);
                        let (g_ij, c1) = self.kernel(ti, tj).eval_guarded(r);
                        let (g_ji, c2) = self.kernel(tj, ti).eval_guarded(r);
                        clamped += c1 as usize + c2 as usize;
                        let wi = g_ij * inv[tj];
                        let wj = g_ji * inv[ti];
                        for k in 0..d {
                            let diff = y[j * d + k] - y[i * d + k];
                            dy[i * d + k] += wi * diff;
                            dy[j * d + k] -= wj * diff;
                        }
                    }
                }
            }
            SystemClass::SecondOrderHomogeneous => {
                let kernel = &self.kernels[0];
                let inv_n = T::from_count(n).recip();
                let (x, v) = y.split_at(nd);
                let (dx, dv) = dy.split_at_mut(nd);
                dx.copy_from_slice(v);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let r = distance(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
                        let (g, c) = kernel.eval_guarded(r);
                        clamped += c as usize;
                        let w = g * inv_n;
                        for k in 0..d {
                            let diff = w * (v[j * d + k] - v[i * d + k]);
                            dv[i * d + k] += diff;
                            dv[j * d + k] -= diff;
                        }
                    }
                }
            }
        }
        clamped
    }
}

impl<T: Real> OdeSystem<T> for SystemSpec<T> {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) {
        self.rhs_into(y, dy);
    }
}

/// Euclidean distance.
#[inline]
pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (q - p) * (q - p)).sum::<T>().sqrt()
}

/// Positions (and, for second-order systems, velocities) of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T> {
    pub positions: Vec<T>,
    pub velocities: Option<Vec<T>>,
    pub time: T,
}

impl<T: Real> AgentState<T> {
    pub fn new(positions: Vec<T>) -> Self {
        AgentState { positions, velocities: None, time: T::zero() }
    }

    pub fn with_velocities(positions: Vec<T>, velocities: Vec<T>) -> Self {
        AgentState { positions, velocities: Some(velocities), time: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|v| v.is_finite())
            && self.velocities.as_ref().is_none_or(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Flattened first-order state for `spec`.
    pub fn to_vector(&self, spec: &SystemSpec<T>) -> Result<Vec<T>> {
        let nd = spec.n * spec.d;
        if self.positions.len() != nd {
            return Err(Error::Input(format!("expected {nd} position entries, got {}", self.positions.len())));
        }
        if !spec.class.is_second_order() {
            return Ok(self.positions.clone());
        }
        let v = self
            .velocities
            .as_ref()
            .ok_or_else(|| Error::Input("second-order state requires velocities".into()))?;
        if v.len() != nd {
            return Err(Error::Input(format!("expected {nd} velocity entries, got {}", v.len())));
        }
        let mut y = self.positions.clone();
        y.extend_from_slice(v);
        Ok(y)
    }

    pub fn from_vector(y: &[T], spec: &SystemSpec<T>, time: T) -> Self {
        let nd = spec.n * spec.d;
        AgentState {
            positions: y[..nd].to_vec(),
            velocities: spec.class.is_second_order().then(|| y[nd..2 * nd].to_vec()),
            time,
        }
    }
}

/// Right-hand side output with the number of clamped pair evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsOutput<T> {
    pub values: Vec<T>,
    pub clamped_pairs: usize,
}

fn check_class<T: Real>(spec: &SystemSpec<T>, want: SystemClass) -> Result<()> {
    if spec.class != want {
        return Err(Error::Config(format!("expected a {want} system, got {}", spec.class)));
    }
    spec.validate()
}

fn first_order_rhs<T: Real>(state: &AgentState<T>, spec: &SystemSpec<T>) -> Result<RhsOutput<T>> {
    if !state.is_finite() {
        return Err(Error::Input("state contains non-finite entries".into()));
    }
    let y = state.to_vector(spec)?;
    let mut dy = vec![T::zero(); y.len()];
    let clamped_pairs = spec.rhs_into(&y, &mut dy);
    Ok(RhsOutput { values: dy, clamped_pairs })
}

/// Velocities `dx_i/dt = (1/n) Σ g(|r_{i'i}|) r_{i'i}`.
pub fn rhs_first_order_homog<T: Real>(state: &AgentState<T>, spec: &SystemSpec<T>) -> Result<RhsOutput<T>> {
    check_class(spec, SystemClass::FirstOrderHomogeneous)?;
    first_order_rhs(state, spec)
}

/// Velocities `dx_i/dt = Σ (1/n_{k_i'}) g_{k_i k_i'}(|r_{i'i}|) r_{i'i}`.
pub fn rhs_first_order_heterog<T: Real>(state: &AgentState<T>, spec: &SystemSpec<T>) -> Result<RhsOutput<T>> {
    check_class(spec, SystemClass::FirstOrderHeterogeneous)?;
    first_order_rhs(state, spec)
}

/// Accelerations `(1/n) Σ g(|r_{i'i}|) (v_i' − v_i)`; only the acceleration
/// half of the first-order form is returned.
pub fn rhs_second_order_homog<T: Real>(state: &AgentState<T>, spec: &SystemSpec<T>) -> Result<RhsOutput<T>> {
    check_class(spec, SystemClass::SecondOrderHomogeneous)?;
    if state.velocities.is_none() {
        return Err(Error::Input("second-order right-hand side requires velocities".into()));
    }
    let mut out = first_order_rhs(state, spec)?;
    out.values.drain(..spec.n * spec.d);
    Ok(out)
}

/// Dispatches on the system class; the result is always the derivative of
/// the full first-order state.
pub fn rhs<T: Real>(state: &AgentState<T>, spec: &SystemSpec<T>) -> Result<RhsOutput<T>> {
    spec.validate()?;
    first_order_rhs(state, spec)
}
