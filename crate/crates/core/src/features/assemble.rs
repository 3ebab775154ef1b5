use rayon::prelude::*;

use crate::datagen::TrajectorySet;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{Family, FeatureBasis};

/// Row selection and chunking for feature assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowOptions {
    /// Also use the timestamps whose derivative estimates are one-sided.
    pub include_boundary: bool,
    /// Approximate number of rows handed to the sink at a time.
    pub chunk_rows: usize,
}

impl Default for RowOptions {
    fn default() -> Self {
        RowOptions { include_boundary: false, chunk_rows: 8192 }
    }
}

/// Which rows and columns a stream covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnGroup {
    /// Every agent, every column.
    All,
    /// Agents of type `a` only, restricted to the contiguous columns of
    /// blocks `(a, 1)` and `(a, 2)`; the other columns of these rows vanish.
    Type(usize),
}

/// Origin of one regression row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowIndex {
    pub trajectory: usize,
    pub step: usize,
    pub agent: usize,
    pub coordinate: usize,
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<T>,
    pub row_index: Vec<RowIndex>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, k: usize) -> T {
        self.values[i * self.cols + k]
    }

    /// `A·c`.
    pub fn apply(&self, c: &[T]) -> Vec<T> {
        self.values.par_chunks(self.cols.max(1)).map(|row| crate::scalar::dot(row, c)).collect()
    }
}

struct Plan<'a, T> {
    traj: &'a TrajectorySet<T>,
    basis: &'a FeatureBasis<T>,
    agents: Vec<usize>,
    col_start: usize,
    cols: usize,
    inv_counts: [T; 2],
    frames: Vec<(usize, usize)>,
    targets: &'a [T],
    second_order: bool,
}

impl<'a, T: Real> Plan<'a, T> {
    fn new(traj: &'a TrajectorySet<T>, basis: &'a FeatureBasis<T>, group: ColumnGroup, opts: &RowOptions) -> Result<Self> {
        if basis.class != traj.class {
            return Err(Error::Config(format!("basis is for a {} system, data is {}", basis.class, traj.class)));
        }
        if basis.is_empty() {
            return Err(Error::Config("feature basis is empty".into()));
        }
        if basis.omegas.len() != basis.norms.len() {
            return Err(Error::Config("basis normalization table has the wrong length".into()));
        }
        let second_order = traj.class.is_second_order();
        let targets = if second_order {
            if traj.velocities.is_none() {
                return Err(Error::State("second-order features need velocity estimates".into()));
            }
            traj.accelerations.as_deref().ok_or_else(|| Error::State("second-order training needs accelerations".into()))?
        } else {
            traj.velocities.as_deref().ok_or_else(|| Error::State("first-order training needs velocity estimates".into()))?
        };
        let het = traj.class.is_heterogeneous();
        if het && basis.blocks.is_none() {
            return Err(Error::Config("heterogeneous data needs a block-structured basis".into()));
        }
        if !het && basis.blocks.is_some() {
            return Err(Error::Config("block-structured basis given for homogeneous data".into()));
        }
        if matches!(basis.family, Family::Fourier { .. }) && (het || second_order) {
            return Err(Error::Config("Fourier features are defined for first-order homogeneous systems only".into()));
        }
        if het && traj.type_labels.len() != traj.n {
            return Err(Error::Config("heterogeneous data needs one type label per agent".into()));
        }
        let mut counts = [0usize; 2];
        for i in 0..traj.n {
            counts[traj.type_of(i)] += 1;
        }
        let inv_counts = if het {
            counts.map(|c| if c > 0 { T::from_count(c).recip() } else { T::zero() })
        } else {
            [T::from_count(traj.n).recip(); 2]
        };
        let (agents, col_start, cols) = match group {
            ColumnGroup::All => ((0..traj.n).collect(), 0, basis.len()),
            ColumnGroup::Type(a) => {
                if a > 1 {
                    return Err(Error::Config(format!("agent type {} does not exist", a + 1)));
                }
                let b0 = basis.block(a, 0);
                let b1 = basis.block(a, 1);
                let agents = (0..traj.n).filter(|&i| traj.type_of(i) == a).collect();
                (agents, b0.offset, b0.len + b1.len)
            }
        };
        let frames = (0..traj.num_trajectories())
            .flat_map(|l| traj.training_steps(opts.include_boundary).map(move |j| (l, j)))
            .collect();
        Ok(Plan { traj, basis, agents, col_start, cols, inv_counts, frames, targets, second_order })
    }

    fn rows_per_frame(&self) -> usize {
        self.agents.len() * self.traj.d
    }

    /// Fills the feature rows (`rows_per_frame × cols`) and targets of one frame.
    fn fill(&self, l: usize, j: usize, a: &mut [T], v: &mut [T]) {
        let tr = self.traj;
        let (n, d) = (tr.n, tr.d);
        let x = tr.frame(l, j);
        let diffs = if self.second_order { tr.velocity_frame(l, j).unwrap() } else { x };
        let off = tr.offset(l, j);
        a.iter_mut().for_each(|e| *e = T::zero());
        let mut profile = vec![T::zero(); self.cols];
        let mut delta = vec![T::zero(); d];
        let het = tr.class.is_heterogeneous();
        for (slot, &i) in self.agents.iter().enumerate() {
            let ti = tr.type_of(i);
            for c in 0..d {
                v[slot * d + c] = self.targets[off + i * d + c];
            }
            for p in 0..n {
                if p == i {
                    continue;
                }
                let tp = tr.type_of(p);
                let r2: T = (0..d).map(|c| (x[p * d + c] - x[i * d + c]).powi(2)).sum();
                for c in 0..d {
                    delta[c] = diffs[p * d + c] - diffs[i * d + c];
                }
                let blk = if het { self.basis.block(ti, tp) } else { self.basis.block(0, 0) };
                let local = blk.offset - self.col_start;
                let scale = self.inv_counts[tp];
                let prof = &mut profile[local..local + blk.len];
                let omegas = &self.basis.omegas[blk.offset..blk.offset + blk.len];
                let norms = &self.basis.norms[blk.offset..blk.offset + blk.len];
                match &self.basis.family {
                    Family::Radial => {
                        for ((out, &w), &nk) in prof.iter_mut().zip(omegas).zip(norms) {
                            *out = nk * scale * (-r2 * w * w).exp();
                        }
                    }
                    Family::Fourier { phases } => {
                        let r = r2.sqrt();
                        let ph = &phases[blk.offset..blk.offset + blk.len];
                        for ((out, &w), &b) in prof.iter_mut().zip(omegas).zip(ph) {
                            *out = scale * (w * r + b).cos();
                        }
                    }
                }
                for c in 0..d {
                    let row = &mut a[(slot * d + c) * self.cols + local..(slot * d + c) * self.cols + local + blk.len];
                    let dc = delta[c];
                    for (e, &pv) in row.iter_mut().zip(prof.iter()) {
                        *e += pv * dc;
                    }
                }
            }
        }
    }
}

/// Streams regression rows `(ℓ, j, i, coordinate)` in that order to `sink`
/// as `(feature rows, targets, column count)`. Frames within a chunk are
/// assembled in parallel, each into its own slice, so the output does not
/// depend on scheduling.
pub fn stream_rows<T: Real>(
    traj: &TrajectorySet<T>,
    basis: &FeatureBasis<T>,
    group: ColumnGroup,
    opts: &RowOptions,
    mut sink: impl FnMut(&[T], &[T], usize) -> Result<()>,
) -> Result<()> {
    let plan = Plan::new(traj, basis, group, opts)?;
    let rpf = plan.rows_per_frame();
    if rpf == 0 || plan.frames.is_empty() {
        return Ok(());
    }
    let per_chunk = (opts.chunk_rows / rpf).max(1);
    let cols = plan.cols;
    let mut a = Vec::new();
    let mut v = Vec::new();
    for frames in plan.frames.chunks(per_chunk) {
        let rows = frames.len() * rpf;
        a.resize(rows * cols, T::zero());
        v.resize(rows, T::zero());
        a.par_chunks_mut(rpf * cols).zip(v.par_chunks_mut(rpf)).zip(frames.par_iter()).for_each(|((ab, vb), &(l, j))| {
            plan.fill(l, j, ab, vb);
        });
        let bad = a.iter().any(|x| !x.is_finite());
        if bad {
            return Err(Error::Numerical("feature matrix has non-finite entries".into()));
        }
        sink(&a[..rows * cols], &v[..rows], cols)?;
    }
    Ok(())
}

/// Dense feature matrix over all agents and columns.
pub fn assemble_feature_matrix<T: Real>(
    traj: &TrajectorySet<T>,
    basis: &FeatureBasis<T>,
    opts: &RowOptions,
) -> Result<FeatureMatrix<T>> {
    Ok(assemble_system(traj, basis, opts)?.0)
}

/// Feature matrix together with the target vector.
pub fn assemble_system<T: Real>(
    traj: &TrajectorySet<T>,
    basis: &FeatureBasis<T>,
    opts: &RowOptions,
) -> Result<(FeatureMatrix<T>, Vec<T>)> {
    let mut values = Vec::new();
    let mut targets = Vec::new();
    let mut cols = basis.len();
    stream_rows(traj, basis, ColumnGroup::All, opts, |a, v, c| {
        values.extend_from_slice(a);
        targets.extend_from_slice(v);
        cols = c;
        Ok(())
    })?;
    let mut row_index = Vec::with_capacity(targets.len());
    for l in 0..traj.num_trajectories() {
        for j in traj.training_steps(opts.include_boundary) {
            for agent in 0..traj.n {
                for coordinate in 0..traj.d {
                    row_index.push(RowIndex { trajectory: l, step: j, agent, coordinate });
                }
            }
        }
    }
    Ok((FeatureMatrix { rows: targets.len(), cols, values, row_index }, targets))
}

/// Regression targets (velocities or accelerations) in row order.
pub fn target_vector<T: Real>(traj: &TrajectorySet<T>, opts: &RowOptions) -> Result<Vec<T>> {
    let src = if traj.class.is_second_order() { &traj.accelerations } else { &traj.velocities };
    let src = src.as_deref().ok_or_else(|| Error::State("dataset has no derivative estimates".into()))?;
    let mut out = Vec::new();
    for l in 0..traj.num_trajectories() {
        for j in traj.training_steps(opts.include_boundary) {
            let o = traj.offset(l, j);
            out.extend_from_slice(&src[o..o + traj.n * traj.d]);
        }
    }
    Ok(out)
}
