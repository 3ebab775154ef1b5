//! Dense least-squares kernels on top of `faer`.
//!
//! Tall regression problems are compressed once by a streaming Householder
//! QR of the augmented matrix `[A | V]`: the upper triangle `[[R, z], [0, ρ]]`
//! satisfies `AᵀA = RᵀR`, `AᵀV = Rᵀz` and `‖V − Ac‖² = ‖z − Rc‖² + ρ²`, so
//! every solver works on an `N × N` system regardless of the row count.

use faer::Mat;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `N × N` upper-triangular stand-in for a tall least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem<T> {
    pub cols: usize,
    /// Row-major `cols × cols` upper triangle.
    pub r: Vec<T>,
    pub z: Vec<T>,
    /// Residual norm that no coefficient vector can remove.
    pub rho: T,
    /// Rows of the original problem.
    pub rows: usize,
    /// `‖V‖₂` of the original targets.
    pub target_norm: T,
}

impl<T: Real> ReducedSystem<T> {
    /// Compresses a dense row-major system.
    pub fn from_dense(a: &[T], v: &[T], cols: usize) -> Result<Self> {
        let mut acc = QrAccumulator::new(cols);
        acc.push(a, v)?;
        acc.finish()
    }

    pub fn r_at(&self, i: usize, j: usize) -> T {
        self.r[i * self.cols + j]
    }

    /// `R·c`.
    pub fn apply(&self, c: &[T]) -> Vec<T> {
        let n = self.cols;
        (0..n).map(|i| (i..n).map(|j| self.r[i * n + j] * c[j]).sum()).collect()
    }

    /// `Rᵀ·y`.
    pub fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        let n = self.cols;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let yi = y[i];
            if yi == T::zero() {
                continue;
            }
            for j in i..n {
                out[j] += self.r[i * n + j] * yi;
            }
        }
        out
    }

    /// `Aᵀ(V − Ac)` expressed through the reduced system.
    pub fn gradient(&self, c: &[T]) -> Vec<T> {
        let rc = self.apply(c);
        let res: Vec<T> = self.z.iter().zip(&rc).map(|(&z, &p)| z - p).collect();
        self.apply_transpose(&res)
    }

    /// `‖V − Ac‖₂`.
    pub fn residual_norm(&self, c: &[T]) -> T {
        let rc = self.apply(c);
        let s: T = self.z.iter().zip(&rc).map(|(&z, &p)| (z - p) * (z - p)).sum();
        (s + self.rho * self.rho).sqrt()
    }

    /// Columns `cols` of `R` as a dense `faer` matrix.
    pub fn columns(&self, idx: &[usize]) -> Mat<T> {
        let n = self.cols;
        Mat::from_fn(n, idx.len(), |i, k| self.r[i * n + idx[k]])
    }

    /// Block-diagonal combination of independent systems over disjoint column ranges.
    pub fn block_diagonal(parts: &[(usize, ReducedSystem<T>)], cols: usize) -> Result<Self> {
        let mut r = vec![T::zero(); cols * cols];
        let mut z = vec![T::zero(); cols];
        let mut rho2 = T::zero();
        let mut v2 = T::zero();
        let mut rows = 0;
        let mut covered = vec![false; cols];
        for (offset, p) in parts {
            if offset + p.cols > cols {
                return Err(Error::Config("block extends beyond the column count".into()));
            }
            for i in 0..p.cols {
                if covered[offset + i] {
                    return Err(Error::Config("blocks overlap".into()));
                }
                covered[offset + i] = true;
                z[offset + i] = p.z[i];
                for j in 0..p.cols {
                    r[(offset + i) * cols + offset + j] = p.r[i * p.cols + j];
                }
            }
            rho2 += p.rho * p.rho;
            v2 += p.target_norm * p.target_norm;
            rows += p.rows;
        }
        Ok(ReducedSystem { cols, r, z, rho: rho2.sqrt(), rows, target_norm: v2.sqrt() })
    }
}

/// Streaming QR of `[A | V]` fed in row blocks.
#[derive(Debug, Clone)]
pub struct QrAccumulator<T> {
    cols: usize,
    /// `(cols+1) × (cols+1)` row-major triangle; empty before the first flush.
    triangle: Vec<T>,
    buffer: Vec<T>,
    buffered: usize,
    flush_rows: usize,
    rows: usize,
    target_norm2: T,
}

impl<T: Real> QrAccumulator<T> {
    pub fn new(cols: usize) -> Self {
        let flush_rows = (16 * (cols + 1)).clamp(4096, 16384);
        QrAccumulator {
            cols,
            triangle: Vec::new(),
            buffer: Vec::new(),
            buffered: 0,
            flush_rows,
            rows: 0,
            target_norm2: T::zero(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Appends row-major rows of `A` with their targets.
    pub fn push(&mut self, a: &[T], v: &[T]) -> Result<()> {
        let w = self.cols + 1;
        if a.len() != v.len() * self.cols {
            return Err(Error::Config(format!("row block of {} values does not match {} targets", a.len(), v.len())));
        }
        if a.iter().chain(v).any(|x| !x.is_finite()) {
            return Err(Error::Input("least-squares data contain non-finite entries".into()));
        }
        for (row, &t) in a.chunks(self.cols.max(1)).zip(v) {
            self.buffer.extend_from_slice(&row[..self.cols]);
            self.buffer.push(t);
            self.buffered += 1;
            self.rows += 1;
            self.target_norm2 += t * t;
            if self.buffered >= self.flush_rows {
                self.flush();
            }
        }
        debug_assert_eq!(self.buffer.len(), self.buffered * w);
        Ok(())
    }

    fn flush(&mut self) {
        if self.buffered == 0 {
            return;
        }
        let w = self.cols + 1;
        let top = if self.triangle.is_empty() { 0 } else { w };
        let m = top + self.buffered;
        let tri = &self.triangle;
        let buf = &self.buffer;
        let stacked = Mat::from_fn(m, w, |i, j| if i < top { tri[i * w + j] } else { buf[(i - top) * w + j] });
        let qr = stacked.qr();
        let r = qr.thin_R();
        let k = r.nrows();
        let mut out = vec![T::zero(); w * w];
        for i in 0..k.min(w) {
            for j in i..w {
                out[i * w + j] = r[(i, j)];
            }
        }
        self.triangle = out;
        self.buffer.clear();
        self.buffered = 0;
    }

    pub fn finish(mut self) -> Result<ReducedSystem<T>> {
        self.flush();
        let n = self.cols;
        let w = n + 1;
        if self.triangle.is_empty() {
            self.triangle = vec![T::zero(); w * w];
        }
        let mut r = vec![T::zero(); n * n];
        let mut z = vec![T::zero(); n];
        for i in 0..n {
            r[i * n..(i + 1) * n].copy_from_slice(&self.triangle[i * w..i * w + n]);
            z[i] = self.triangle[i * w + n];
        }
        let rho = self.triangle[n * w + n].abs();
        Ok(ReducedSystem { cols: n, r, z, rho, rows: self.rows, target_norm: self.target_norm2.sqrt() })
    }
}

/// Outcome of a minimum-norm solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution<T> {
    pub x: Vec<T>,
    pub rank: usize,
    pub sigma_max: T,
    pub sigma_min: T,
}

impl<T: Real> MinNormSolution<T> {
    pub fn rank_deficient(&self, cols: usize) -> bool {
        self.rank < cols
    }
}

/// Relative singular-value cutoff used when none is supplied:
/// `max(rows, cols) · ε`.
pub fn default_rcond<T: Real>(rows: usize, cols: usize) -> T {
    T::from_count(rows.max(cols)) * T::epsilon()
}

fn svd_parts<T: Real>(m: &Mat<T>) -> Result<(Mat<T>, Vec<T>, Mat<T>)> {
    let svd = m.thin_svd().map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let sv: Vec<T> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((svd.U().to_owned(), sv, svd.V().to_owned()))
}

/// Applies the spectral filter `f(σ)` to solve `m x ≈ rhs`:
/// `x = Σ f(σ_i) (u_iᵀ rhs) v_i`.
fn filtered_solve<T: Real>(m: &Mat<T>, rhs: &[T], filter: impl Fn(T, T) -> Option<T>) -> Result<MinNormSolution<T>> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rhs.len() != rows {
        return Err(Error::Config("right-hand side length differs from the row count".into()));
    }
    if cols == 0 {
        return Ok(MinNormSolution { x: vec![], rank: 0, sigma_max: T::zero(), sigma_min: T::zero() });
    }
    let (u, s, v) = svd_parts(m)?;
    let smax = s.first().copied().unwrap_or(T::zero());
    let mut x = vec![T::zero(); cols];
    let mut rank = 0;
    let mut smin = smax;
    for (i, &si) in s.iter().enumerate() {
        let Some(f) = filter(si, smax) else { continue };
        rank += 1;
        smin = si;
        let coef: T = (0..rows).map(|r| u[(r, i)] * rhs[r]).sum::<T>() * f;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coef * v[(j, i)];
        }
    }
    Ok(MinNormSolution { x, rank, sigma_max: smax, sigma_min: if rank == 0 { T::zero() } else { smin } })
}

/// Minimum-norm least-squares solution by truncated SVD: singular values at
/// or below `rcond · σ_max` are discarded.
pub fn min_norm_solve<T: Real>(m: &Mat<T>, rhs: &[T], rcond: Option<T>) -> Result<MinNormSolution<T>> {
    let tol = rcond.unwrap_or_else(|| default_rcond(m.nrows(), m.ncols()));
    filtered_solve(m, rhs, |s, smax| (s > tol * smax && s > T::zero()).then(|| s.recip()))
}

/// Ridge solution `argmin ‖rhs − m x‖² + λ‖x‖²` via SVD filter factors `σ / (σ² + λ)`.
pub fn ridge_solve<T: Real>(m: &Mat<T>, rhs: &[T], lambda: T) -> Result<MinNormSolution<T>> {
    filtered_solve(m, rhs, |s, _| (s > T::zero()).then(|| s / (s * s + lambda)))
}

/// Dense row-major matrix to `faer`.
pub fn to_mat<T: Real>(a: &[T], rows: usize, cols: usize) -> Mat<T> {
    Mat::from_fn(rows, cols, |i, j| a[i * cols + j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::item_rng;
    use rand::Rng as _;

    fn random(rows: usize, cols: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = item_rng(seed, 0);
        let a = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        (a, v)
    }

    #[test]
    fn streaming_matches_dense_normal_equations() {
        let (rows, cols) = (9000, 6);
        let (a, v) = random(rows, cols, 1);
        let mut acc = QrAccumulator::new(cols);
        for (ab, vb) in a.chunks(cols * 1234).zip(v.chunks(1234)) {
            acc.push(ab, vb).unwrap();
        }
        let red = acc.finish().unwrap();
        assert_eq!(red.rows, rows);
        let c = [0.3, -0.2, 0.1, 0.0, 0.5, -1.0];
        let direct: f64 = (0..rows)
            .map(|i| {
                let p: f64 = (0..cols).map(|k| a[i * cols + k] * c[k]).sum();
                (v[i] - p).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!((red.residual_norm(&c) - direct).abs() < 1e-10 * direct);
        for i in 0..cols {
            for j in 0..cols {
                let gram: f64 = (0..rows).map(|r| a[r * cols + i] * a[r * cols + j]).sum();
                let rr: f64 = (0..cols).map(|k| red.r_at(k, i) * red.r_at(k, j)).sum();
                assert!((gram - rr).abs() < 1e-9 * gram.abs().max(1.0));
            }
        }
    }

    #[test]
    fn few_rows_are_padded() {
        let red = ReducedSystem::<f64>::from_dense(&[1.0, 2.0, 3.0], &[1.0], 3).unwrap();
        assert_eq!(red.r.len(), 9);
        assert!(red.residual_norm(&[1.0, 0.0, 0.0]) < 1e-14);
        assert!(red.rho.abs() < 1e-14);
    }

    #[test]
    fn min_norm_on_duplicate_columns() {
        let m = to_mat::<f64>(&[1.0, 1.0, 2.0, 2.0], 2, 2);
        let s = min_norm_solve(&m, &[2.0, 4.0], None).unwrap();
        assert_eq!(s.rank, 1);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }
}
