//! Coefficient estimation: least squares, ridge, hard thresholding pursuit
//! and non-negative least squares.
//!
//! Every solver works on a [`ReducedSystem`]; the `*_dense` wrappers
//! compress a dense matrix first.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{default_rcond, min_norm_solve, ridge_solve, MinNormSolution, ReducedSystem};
use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Ols,
    Ridge,
    Htp,
    Nnls,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Ols => "ols",
            SolverKind::Ridge => "ridge",
            SolverKind::Htp => "htp",
            SolverKind::Nnls => "nnls",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ols" => Ok(SolverKind::Ols),
            "ridge" => Ok(SolverKind::Ridge),
            "htp" => Ok(SolverKind::Htp),
            "nnls" => Ok(SolverKind::Nnls),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

/// Solver choice with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver<T> {
    Ols,
    Ridge { lambda: T },
    Htp { sparsity: usize, max_iters: usize },
    Nnls { max_iters: usize },
}

impl<T: Real> Solver<T> {
    pub fn kind(&self) -> SolverKind {
        match self {
            Solver::Ols => SolverKind::Ols,
            Solver::Ridge { .. } => SolverKind::Ridge,
            Solver::Htp { .. } => SolverKind::Htp,
            Solver::Nnls { .. } => SolverKind::Nnls,
        }
    }

    pub fn solve(&self, sys: &ReducedSystem<T>, rcond: Option<T>) -> Result<SolveReport<T>> {
        match *self {
            Solver::Ols => solve_least_squares(sys, rcond),
            Solver::Ridge { lambda } => solve_ridge(sys, lambda),
            Solver::Htp { sparsity, max_iters } => solve_htp(sys, sparsity, max_iters, rcond),
            Solver::Nnls { max_iters } => solve_nonnegative(sys, max_iters),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub coefficients: Vec<T>,
    /// Indices of the nonzero (HTP: selected) coefficients, ascending.
    pub support: Vec<usize>,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub solver: SolverKind,
    /// Some (restricted) solve discarded singular directions.
    pub rank_deficient: bool,
    /// Largest relative optimality violation seen (restricted normal
    /// equations for OLS/HTP, KKT residual for NNLS).
    pub optimality: T,
    /// Threads used by the dense kernels.
    pub threads: usize,
}

fn nonzero_support<T: Real>(c: &[T]) -> Vec<usize> {
    c.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(k, _)| k).collect()
}

/// `‖A_Sᵀ(V − Ac)‖ / ‖A_Sᵀ V‖` on the columns `idx`.
fn restricted_optimality<T: Real>(sys: &ReducedSystem<T>, c: &[T], idx: &[usize]) -> T {
    let g = sys.gradient(c);
    let b = sys.apply_transpose(&sys.z);
    let num = norm2(&idx.iter().map(|&k| g[k]).collect::<Vec<_>>());
    let den = norm2(&idx.iter().map(|&k| b[k]).collect::<Vec<_>>());
    if den > T::zero() {
        num / den
    } else {
        num
    }
}

/// Least squares restricted to the columns `idx`; a full-length vector is returned.
fn restricted_solve<T: Real>(sys: &ReducedSystem<T>, idx: &[usize], rcond: Option<T>) -> Result<(Vec<T>, MinNormSolution<T>)> {
    let m = sys.columns(idx);
    let tol = rcond.unwrap_or_else(|| default_rcond(sys.rows, idx.len()));
    let sol = min_norm_solve(&m, &sys.z, Some(tol))?;
    let mut c = vec![T::zero(); sys.cols];
    for (&k, &x) in idx.iter().zip(&sol.x) {
        c[k] = x;
    }
    Ok((c, sol))
}

/// Minimum-norm least-squares solution.
pub fn solve_least_squares<T: Real>(sys: &ReducedSystem<T>, rcond: Option<T>) -> Result<SolveReport<T>> {
    let all: Vec<usize> = (0..sys.cols).collect();
    let (c, sol) = restricted_solve(sys, &all, rcond)?;
    Ok(SolveReport {
        residual_norm: sys.residual_norm(&c),
        optimality: restricted_optimality(sys, &c, &all),
        support: nonzero_support(&c),
        coefficients: c,
        iterations: 1,
        converged: true,
        solver: SolverKind::Ols,
        rank_deficient: sol.rank_deficient(sys.cols),
        threads: 1,
    })
}

/// `argmin ‖V − Ac‖² + λ‖c‖²`.
pub fn solve_ridge<T: Real>(sys: &ReducedSystem<T>, lambda: T) -> Result<SolveReport<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Input(format!("ridge parameter must be non-negative, got {lambda}")));
    }
    if lambda == T::zero() {
        let mut rep = solve_least_squares(sys, None)?;
        rep.solver = SolverKind::Ridge;
        return Ok(rep);
    }
    let all: Vec<usize> = (0..sys.cols).collect();
    let sol = ridge_solve(&sys.columns(&all), &sys.z, lambda)?;
    let c = sol.x;
    Ok(SolveReport {
        residual_norm: sys.residual_norm(&c),
        optimality: T::zero(),
        support: nonzero_support(&c),
        coefficients: c,
        iterations: 1,
        converged: true,
        solver: SolverKind::Ridge,
        rank_deficient: sol.rank < sys.cols,
        threads: 1,
    })
}

/// Indices of the `s` largest `|u_k|`, ties broken toward the lower index; ascending.
pub fn top_s_support<T: Real>(u: &[T], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[b].abs().partial_cmp(&u[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Hard thresholding pursuit from `c⁰ = 0` with unit step:
/// `S ← top_s(c + Aᵀ(V − Ac))`, then least squares on exactly `S`.
/// Stops on a repeated support, a support cycle, or after `max_iters` solves.
pub fn solve_htp<T: Real>(sys: &ReducedSystem<T>, s: usize, max_iters: usize, rcond: Option<T>) -> Result<SolveReport<T>> {
    if s == 0 || s > sys.cols {
        return Err(Error::Config(format!("sparsity must lie in [1, {}], got {s}", sys.cols)));
    }
    if max_iters == 0 {
        return Err(Error::Config("HTP needs at least one iteration".into()));
    }
    let mut c = vec![T::zero(); sys.cols];
    let mut support: Vec<usize> = Vec::new();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut rank_deficient = false;
    let mut optimality = T::zero();
    while iterations < max_iters {
        let g = sys.gradient(&c);
        let u: Vec<T> = c.iter().zip(&g).map(|(&ci, &gi)| ci + gi).collect();
        let next = top_s_support(&u, s);
        if iterations > 0 && next == support {
            converged = true;
            break;
        }
        if visited.contains(&next) {
            break;
        }
        let (cn, sol) = restricted_solve(sys, &next, rcond)?;
        rank_deficient |= sol.rank_deficient(next.len());
        optimality = optimality.max(restricted_optimality(sys, &cn, &next));
        c = cn;
        visited.insert(next.clone());
        support = next;
        iterations += 1;
    }
    Ok(SolveReport {
        residual_norm: sys.residual_norm(&c),
        coefficients: c,
        support,
        iterations,
        converged,
        solver: SolverKind::Htp,
        rank_deficient,
        optimality,
        threads: 1,
    })
}

/// Lawson–Hanson active-set NNLS: `argmin ‖V − Ac‖²` subject to `c ≥ 0`.
pub fn solve_nonnegative<T: Real>(sys: &ReducedSystem<T>, max_iters: usize) -> Result<SolveReport<T>> {
    let n = sys.cols;
    let scale = norm2(&sys.apply_transpose(&sys.z)).max(T::min_positive_value());
    let tol = T::lit(10.0) * T::epsilon() * T::from_count(n.max(1)) * scale;
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut rank_deficient = false;
    'outer: loop {
        let w = sys.gradient(&x);
        let candidate = (0..n).filter(|&k| !passive[k] && w[k] > tol).max_by(|&a, &b| {
            w[a].partial_cmp(&w[b]).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
        });
        let Some(t) = candidate else {
            converged = true;
            break;
        };
        if iterations >= max_iters {
            break;
        }
        passive[t] = true;
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let (z, sol) = restricted_solve(sys, &idx, None)?;
            rank_deficient |= sol.rank_deficient(idx.len());
            if idx.iter().all(|&k| z[k] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::infinity();
            let mut blocking = idx[0];
            for &k in &idx {
                if z[k] <= T::zero() {
                    let a = x[k] / (x[k] - z[k]);
                    if a < alpha {
                        alpha = a;
                        blocking = k;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = T::zero();
            }
            for k in 0..n {
                let xk = x[k];
                x[k] = xk + alpha * (z[k] - xk);
            }
            x[blocking] = T::zero();
            for k in 0..n {
                if passive[k] && x[k] <= T::zero() {
                    passive[k] = false;
                    x[k] = T::zero();
                }
            }
            if iterations >= max_iters {
                break 'outer;
            }
            if idx.iter().all(|&k| !passive[k]) {
                break;
            }
        }
    }
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let w = sys.gradient(&x);
    let kkt = (0..n)
        .map(|k| if x[k] > T::zero() { w[k].abs() } else { w[k].max(T::zero()) })
        .fold(T::zero(), T::max)
        / scale;
    Ok(SolveReport {
        residual_norm: sys.residual_norm(&x),
        support: nonzero_support(&x),
        coefficients: x,
        iterations,
        converged,
        solver: SolverKind::Nnls,
        rank_deficient,
        optimality: kkt,
        threads: 1,
    })
}

fn reduce<T: Real>(a: &[T], v: &[T], cols: usize) -> Result<ReducedSystem<T>> {
    if v.is_empty() {
        return Err(Error::Input("least squares needs at least one row".into()));
    }
    ReducedSystem::from_dense(a, v, cols)
}

/// Dense row-major wrapper around [`solve_least_squares`].
pub fn solve_least_squares_dense<T: Real>(a: &[T], v: &[T], cols: usize) -> Result<SolveReport<T>> {
    solve_least_squares(&reduce(a, v, cols)?, None)
}

pub fn solve_ridge_dense<T: Real>(a: &[T], v: &[T], cols: usize, lambda: T) -> Result<SolveReport<T>> {
    solve_ridge(&reduce(a, v, cols)?, lambda)
}

pub fn solve_htp_dense<T: Real>(a: &[T], v: &[T], cols: usize, s: usize, max_iters: usize) -> Result<SolveReport<T>> {
    solve_htp(&reduce(a, v, cols)?, s, max_iters, None)
}

pub fn solve_nonnegative_dense<T: Real>(a: &[T], v: &[T], cols: usize) -> Result<SolveReport<T>> {
    solve_nonnegative(&reduce(a, v, cols)?, 3 * cols.max(10))
}

#[cfg(test)]
mod tests {
    use super::*;

    const I2: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

    #[test]
    fn identity_cases() {
        let ols = solve_least_squares_dense(&I2, &[3.0, 1.0], 2).unwrap();
        assert!((ols.coefficients[0] - 3.0).abs() < 1e-14 && (ols.coefficients[1] - 1.0).abs() < 1e-14);
        let htp = solve_htp_dense(&I2, &[3.0, 1.0], 2, 1, 50).unwrap();
        assert_eq!(htp.support, vec![0]);
        assert!((htp.coefficients[0] - 3.0).abs() < 1e-14);
        assert_eq!(htp.coefficients[1], 0.0);
        assert!(htp.converged);
        assert_eq!(htp.iterations, 1);
        let nn = solve_nonnegative_dense(&I2, &[1.0, -2.0], 2).unwrap();
        assert!((nn.coefficients[0] - 1.0).abs() < 1e-14);
        assert_eq!(nn.coefficients[1], 0.0);
    }

    #[test]
    fn scalar_cases() {
        let r = solve_ridge_dense::<f64>(&[1.0], &[1.0], 1, 1.0).unwrap();
        assert!((r.coefficients[0] - 0.5).abs() < 1e-15);
        let nn = solve_nonnegative_dense(&[1.0], &[-1.0], 1).unwrap();
        assert_eq!(nn.coefficients, vec![0.0]);
        assert!(nn.converged);
    }

    #[test]
    fn top_s_ties_prefer_lower_index() {
        assert_eq!(top_s_support(&[1.0, -2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_s_support(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    }

    #[test]
    fn argument_validation() {
        assert!(solve_htp_dense(&I2, &[1.0, 1.0], 2, 0, 5).is_err());
        assert!(solve_htp_dense(&I2, &[1.0, 1.0], 2, 3, 5).is_err());
        assert!(solve_ridge_dense(&I2, &[1.0, 1.0], 2, -1.0).is_err());
        assert!(solve_least_squares_dense(&[f64::NAN, 0.0, 0.0, 1.0], &[1.0, 1.0], 2).is_err());
    }
}
