use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::systems::distance;

use super::TrajectorySet;

/// Histogram bins: a count over the observed range, or explicit edges.
#[derive(Debug, Clone, PartialEq)]
pub enum Bins<T> {
    Count(usize),
    Edges(Vec<T>),
}

impl<T> Default for Bins<T> {
    fn default() -> Self {
        Bins::Count(200)
    }
}

/// Histogram estimate of the pairwise-distance law.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity<T> {
    pub edges: Vec<T>,
    /// Probability mass per bin; sums to one unless the density is empty.
    pub mass: Vec<T>,
    /// Number of pair samples that entered the histogram.
    pub samples: u64,
}

impl<T: Real> RadialDensity<T> {
    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn num_bins(&self) -> usize {
        self.mass.len()
    }

    pub fn midpoints(&self) -> Vec<T> {
        self.edges.windows(2).map(|w| (w[0] + w[1]) / T::lit(2.0)).collect()
    }

    pub fn support(&self) -> (T, T) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    /// Index of the bin containing `r`; the top edge belongs to the last bin.
    pub fn bin_of(&self, r: T) -> Option<usize> {
        let (lo, hi) = self.support();
        if r < lo || r > hi {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= r);
        Some(k.saturating_sub(1).min(self.mass.len() - 1))
    }

    /// Mass-weighted density value (mass / bin width) at `r`.
    pub fn density_at(&self, r: T) -> T {
        self.bin_of(r).map_or(T::zero(), |k| self.mass[k] / (self.edges[k + 1] - self.edges[k]))
    }
}

/// Per-type-pair densities of a heterogeneous dataset; `by_type[a][b]` is
/// symmetric and built from pairs with one agent of each type.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDensities<T> {
    pub all: RadialDensity<T>,
    pub by_type: [[RadialDensity<T>; 2]; 2],
}

fn edges_for<T: Real>(bins: &Bins<T>, range: Option<(T, T)>) -> Result<Vec<T>> {
    match bins {
        Bins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("histogram edges must be strictly increasing".into()));
            }
            Ok(e.clone())
        }
        Bins::Count(0) => Err(Error::Config("histogram needs at least one bin".into())),
        Bins::Count(m) => {
            let (mut lo, mut hi) = range.unwrap_or((T::zero(), T::one()));
            if !(hi > lo) {
                let half = T::lit(0.5) * lo.abs().max(T::one()) * T::lit(1e-6);
                lo = lo - half;
                hi = hi + half;
            }
            let w = (hi - lo) / T::from_count(*m);
            Ok((0..=*m).map(|k| if k == *m { hi } else { lo + w * T::from_count(k) }).collect())
        }
    }
}

/// Visits every unordered pair distance `(type_i, type_j, r)` of every frame.
fn for_each_pair<T: Real>(traj: &TrajectorySet<T>, mut f: impl FnMut(usize, usize, T)) {
    let d = traj.d;
    for l in 0..traj.num_trajectories() {
        for j in 0..traj.num_times() {
            let x = traj.frame(l, j);
            for i in 0..traj.n {
                for k in (i + 1)..traj.n {
                    let r = distance(&x[i * d..(i + 1) * d], &x[k * d..(k + 1) * d]);
                    f(traj.type_of(i), traj.type_of(k), r);
                }
            }
        }
    }
}

struct Histogram<T> {
    edges: Vec<T>,
    counts: Vec<u64>,
    uniform: Option<(T, T)>,
}

impl<T: Real> Histogram<T> {
    fn new(edges: Vec<T>, uniform: bool) -> Self {
        let m = edges.len() - 1;
        let u = uniform.then(|| (edges[0], T::from_count(m) / (edges[m] - edges[0])));
        Histogram { counts: vec![0; m], edges, uniform: u }
    }

    #[inline]
    fn add(&mut self, r: T) {
        let m = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[m]);
        if r < lo || r > hi {
            return;
        }
        let k = match self.uniform {
            Some((lo, inv_w)) => {
                let mut k = ((r - lo) * inv_w).to_usize().unwrap_or(0).min(m - 1);
                // Guard against rounding across an edge.
                while k > 0 && r < self.edges[k] {
                    k -= 1;
                }
                while k + 1 < m && r >= self.edges[k + 1] {
                    k += 1;
                }
                k
            }
            None => self.edges.partition_point(|&e| e <= r).saturating_sub(1).min(m - 1),
        };
        self.counts[k] += 1;
    }

    fn finish(self) -> RadialDensity<T> {
        let total: u64 = self.counts.iter().sum();
        let mass = if total == 0 {
            vec![T::zero(); self.counts.len()]
        } else {
            let t = total as f64;
            self.counts.iter().map(|&c| T::lit(c as f64 / t)).collect()
        };
        RadialDensity { edges: self.edges, mass, samples: total }
    }
}

/// Histogram of all unordered pairwise distances over every time and
/// trajectory, each pair-time sample weighted equally.
pub fn empirical_radial_density<T: Real>(traj: &TrajectorySet<T>, bins: &Bins<T>) -> Result<RadialDensity<T>> {
    if traj.num_trajectories() == 0 {
        return Err(Error::Input("radial density needs at least one trajectory".into()));
    }
    let range = match bins {
        Bins::Count(_) => observed_range(traj, |_, _| true),
        Bins::Edges(_) => None,
    };
    let edges = edges_for(bins, range)?;
    let mut h = Histogram::new(edges, matches!(bins, Bins::Count(_)));
    for_each_pair(traj, |_, _, r| h.add(r));
    Ok(h.finish())
}

fn observed_range<T: Real>(traj: &TrajectorySet<T>, keep: impl Fn(usize, usize) -> bool) -> Option<(T, T)> {
    let mut range: Option<(T, T)> = None;
    for_each_pair(traj, |a, b, r| {
        if keep(a, b) {
            range = Some(match range {
                None => (r, r),
                Some((lo, hi)) => (lo.min(r), hi.max(r)),
            });
        }
    });
    range
}

/// Overall density plus one density per unordered type pair. Each density
/// with a bin count spans its own observed range.
pub fn pair_type_densities<T: Real>(traj: &TrajectorySet<T>, bins: &Bins<T>) -> Result<PairDensities<T>> {
    if traj.num_trajectories() == 0 {
        return Err(Error::Input("radial density needs at least one trajectory".into()));
    }
    let counted = matches!(bins, Bins::Count(_));
    let key = |a: usize, b: usize| if a <= b { a * 2 + b } else { b * 2 + a };
    let mut ranges: [Option<(T, T)>; 5] = [None; 5];
    if counted {
        for_each_pair(traj, |a, b, r| {
            for slot in [4, key(a, b)] {
                ranges[slot] = Some(match ranges[slot] {
                    None => (r, r),
                    Some((lo, hi)) => (lo.min(r), hi.max(r)),
                });
            }
        });
    }
    let mut hists: Vec<Histogram<T>> = Vec::with_capacity(5);
    for range in ranges {
        hists.push(Histogram::new(edges_for(bins, range)?, counted));
    }
    for_each_pair(traj, |a, b, r| {
        hists[4].add(r);
        hists[key(a, b)].add(r);
    });
    let mut it = hists.into_iter().map(Histogram::finish);
    let d00 = it.next().unwrap();
    let d01 = it.next().unwrap();
    let _unused = it.next().unwrap();
    let d11 = it.next().unwrap();
    let all = it.next().unwrap();
    Ok(PairDensities { all, by_type: [[d00, d01.clone()], [d01, d11]] })
}
