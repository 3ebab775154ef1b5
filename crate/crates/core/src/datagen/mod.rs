//! Training corpora: initial conditions, simulated trajectories, observation
//! noise, finite-difference derivatives and the empirical radial density.

mod density;
mod ic;

pub use density::{empirical_radial_density, pair_type_densities, Bins, PairDensities, RadialDensity};
pub use ic::{sample_initial_conditions, IcKind, InitialConditionLaw};

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrationStats, IntegratorSettings};
use crate::scalar::Real;
use crate::seeds::item_rng;
use crate::systems::{AgentState, SystemClass, SystemSpec};

/// `L` trajectories of `n` agents in `d` dimensions observed at `J` times.
///
/// All per-sample arrays are laid out `[ℓ][j][i][k]`, i.e. the entry for
/// trajectory `ℓ`, time `j`, agent `i`, coordinate `k` sits at
/// `((ℓ·J + j)·n + i)·d + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet<T> {
    pub d: usize,
    pub n: usize,
    pub class: SystemClass,
    /// 0-based agent types; empty for homogeneous systems.
    pub type_labels: Vec<usize>,
    pub times: Vec<T>,
    pub positions: Vec<T>,
    /// Velocities: simulated (second-order state), observed or estimated.
    pub velocities: Option<Vec<T>>,
    pub accelerations: Option<Vec<T>>,
    /// Number of timestamps at each end whose derivative estimates are one-sided.
    pub boundary_margin: usize,
    pub noise_applied: bool,
    pub seed: u64,
    pub stats: Vec<IntegrationStats>,
}

impl<T: Real> TrajectorySet<T> {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn num_trajectories(&self) -> usize {
        let per = self.times.len() * self.n * self.d;
        if per == 0 {
            0
        } else {
            self.positions.len() / per
        }
    }

    pub fn len_per_time(&self) -> usize {
        self.n * self.d
    }

    #[inline]
    pub fn offset(&self, l: usize, j: usize) -> usize {
        (l * self.times.len() + j) * self.n * self.d
    }

    /// Positions of all agents of trajectory `l` at time index `j`.
    pub fn frame(&self, l: usize, j: usize) -> &[T] {
        let o = self.offset(l, j);
        &self.positions[o..o + self.n * self.d]
    }

    pub fn velocity_frame(&self, l: usize, j: usize) -> Option<&[T]> {
        let o = self.offset(l, j);
        self.velocities.as_ref().map(|v| &v[o..o + self.n * self.d])
    }

    pub fn acceleration_frame(&self, l: usize, j: usize) -> Option<&[T]> {
        let o = self.offset(l, j);
        self.accelerations.as_ref().map(|v| &v[o..o + self.n * self.d])
    }

    /// Time indices used as regression rows.
    pub fn training_steps(&self, include_boundary: bool) -> std::ops::Range<usize> {
        let j = self.times.len();
        if include_boundary || 2 * self.boundary_margin >= j {
            0..j
        } else {
            self.boundary_margin..j - self.boundary_margin
        }
    }

    pub fn type_of(&self, i: usize) -> usize {
        if self.type_labels.is_empty() {
            0
        } else {
            self.type_labels[i]
        }
    }

    /// Order-dependent checksum of every stored value, for shared-data checks.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for &t in &self.times {
            feed(t.to_f64_lossy());
        }
        for &x in &self.positions {
            feed(x.to_f64_lossy());
        }
        for v in [&self.velocities, &self.accelerations].into_iter().flatten() {
            for &x in v {
                feed(x.to_f64_lossy());
            }
        }
        h
    }
}

/// `J` equidistant timestamps on `[0, T]`.
pub fn uniform_times<T: Real>(t_end: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![T::zero()];
    }
    let h = t_end / T::from_count(count - 1);
    (0..count).map(|j| if j + 1 == count { t_end } else { h * T::from_count(j) }).collect()
}

/// Integrates `spec` from every initial condition and samples at `times`.
///
/// Trajectories run in parallel; results are collected in input order so the
/// output does not depend on scheduling.
pub fn simulate<T: Real>(
    spec: &SystemSpec<T>,
    ics: &[AgentState<T>],
    times: &[T],
    settings: &IntegratorSettings<T>,
    seed: u64,
) -> Result<TrajectorySet<T>> {
    spec.validate()?;
    let nd = spec.n * spec.d;
    let runs: Vec<Result<(Vec<T>, IntegrationStats)>> = ics
        .par_iter()
        .enumerate()
        .map(|(index, ic)| {
            let y0 = ic.to_vector(spec)?;
            integrate(spec, T::zero(), &y0, times, settings)
                .map(|sol| (sol.states, sol.stats))
                .map_err(|e| Error::Trajectory { index, source: Box::new(e) })
        })
        .collect();
    let second = spec.class.is_second_order();
    let mut positions = Vec::with_capacity(ics.len() * times.len() * nd);
    let mut velocities = second.then(|| Vec::with_capacity(ics.len() * times.len() * nd));
    let mut stats = Vec::with_capacity(ics.len());
    for run in runs {
        let (states, st) = run?;
        stats.push(st);
        if let Some(v) = velocities.as_mut() {
            for frame in states.chunks(2 * nd) {
                positions.extend_from_slice(&frame[..nd]);
                v.extend_from_slice(&frame[nd..]);
            }
        } else {
            positions.extend_from_slice(&states);
        }
    }
    Ok(TrajectorySet {
        d: spec.d,
        n: spec.n,
        class: spec.class,
        type_labels: if spec.class.is_heterogeneous() { spec.type_labels.clone() } else { Vec::new() },
        times: times.to_vec(),
        positions,
        velocities,
        accelerations: None,
        boundary_margin: 0,
        noise_applied: false,
        seed,
        stats,
    })
}

/// `L` trajectories from fresh initial conditions on `J` equidistant times in `[0, T]`.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset<T: Real>(
    spec: &SystemSpec<T>,
    law: &InitialConditionLaw<T>,
    trajectories: usize,
    timestamps: usize,
    t_end: T,
    settings: &IntegratorSettings<T>,
    seed: u64,
) -> Result<TrajectorySet<T>> {
    if timestamps < 3 {
        return Err(Error::Config("at least three timestamps are required".into()));
    }
    if !(t_end > T::zero()) {
        return Err(Error::Config("the observation horizon must be positive".into()));
    }
    let ics = sample_initial_conditions(law, trajectories, spec, seed)?;
    simulate(spec, &ics, &uniform_times(t_end, timestamps), settings, seed)
}

/// Replaces every observed value `x` by `x·(1 + σ·u)`, `u ~ U[−1, 1]`.
///
/// Positions and any stored velocities are perturbed; derivative estimates
/// are discarded since they no longer match the observations.
pub fn apply_multiplicative_noise<T: Real>(traj: &TrajectorySet<T>, sigma: T, seed: u64) -> Result<TrajectorySet<T>> {
    if traj.noise_applied {
        return Err(Error::State("noise has already been applied to this dataset".into()));
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::Input(format!("noise level must be non-negative, got {sigma}")));
    }
    let mut out = traj.clone();
    out.noise_applied = true;
    out.accelerations = None;
    if sigma == T::zero() {
        return Ok(out);
    }
    let per_traj = traj.times.len() * traj.n * traj.d;
    let perturb = |data: &mut Vec<T>, stream: u64| {
        data.par_chunks_mut(per_traj.max(1)).enumerate().for_each(|(l, chunk)| {
            let mut rng = item_rng(seed, 2 * l as u64 + stream);
            for x in chunk.iter_mut() {
                let u = T::lit(rng.random_range(-1.0..=1.0));
                *x *= T::one() + sigma * u;
            }
        });
    };
    perturb(&mut out.positions, 0);
    if let Some(v) = out.velocities.as_mut() {
        perturb(v, 1);
    }
    Ok(out)
}

/// First derivative along time of `data` (layout as in [`TrajectorySet`]):
/// central differences inside, one-sided differences at both ends.
fn differentiate<T: Real>(data: &[T], times: &[T], width: usize) -> Vec<T> {
    let jn = times.len();
    let mut out = vec![T::zero(); data.len()];
    let per_traj = jn * width;
    out.par_chunks_mut(per_traj).zip(data.par_chunks(per_traj)).for_each(|(o, x)| {
        for j in 0..jn {
            let (a, b) = if j == 0 {
                (0, 1)
            } else if j + 1 == jn {
                (jn - 2, jn - 1)
            } else {
                (j - 1, j + 1)
            };
            let dt = times[b] - times[a];
            for k in 0..width {
                o[j * width + k] = (x[b * width + k] - x[a * width + k]) / dt;
            }
        }
    });
    out
}

/// Velocity estimates `(x_{j+1} − x_{j−1}) / (t_{j+1} − t_{j−1})` at interior
/// times; the two endpoints use one-sided differences and are excluded from
/// training rows by default.
pub fn estimate_velocities_central_difference<T: Real>(traj: &TrajectorySet<T>) -> Result<TrajectorySet<T>> {
    if traj.times.len() < 3 {
        return Err(Error::Config("velocity estimation needs at least three timestamps".into()));
    }
    let mut out = traj.clone();
    out.velocities = Some(differentiate(&traj.positions, &traj.times, traj.n * traj.d));
    out.accelerations = None;
    out.boundary_margin = 1;
    Ok(out)
}

/// Velocities by central differences of positions, then accelerations by
/// central differences of those velocities. Two timestamps at each end are
/// excluded from training rows.
pub fn estimate_accelerations<T: Real>(traj: &TrajectorySet<T>) -> Result<TrajectorySet<T>> {
    if traj.times.len() < 5 {
        return Err(Error::Config("acceleration estimation needs at least five timestamps".into()));
    }
    let width = traj.n * traj.d;
    let v = differentiate(&traj.positions, &traj.times, width);
    let a = differentiate(&v, &traj.times, width);
    let mut out = traj.clone();
    out.velocities = Some(v);
    out.accelerations = Some(a);
    out.boundary_margin = 2;
    Ok(out)
}

/// Accelerations by central differences of the stored (observed) velocities.
pub fn differentiate_observed_velocities<T: Real>(traj: &TrajectorySet<T>) -> Result<TrajectorySet<T>> {
    if traj.times.len() < 3 {
        return Err(Error::Config("acceleration estimation needs at least three timestamps".into()));
    }
    let v = traj
        .velocities
        .as_ref()
        .ok_or_else(|| Error::State("dataset carries no observed velocities".into()))?;
    let mut out = traj.clone();
    out.accelerations = Some(differentiate(v, &traj.times, traj.n * traj.d));
    out.boundary_margin = 1;
    Ok(out)
}
