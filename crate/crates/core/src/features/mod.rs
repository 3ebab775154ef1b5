//! Random radial features `α(ω)e^{−r²ω²}` (and the Fourier baseline),
//! feature matrices and learned kernels.

mod assemble;

pub use assemble::{
    assemble_feature_matrix, assemble_system, stream_rows, target_vector, ColumnGroup, FeatureMatrix, RowIndex,
    RowOptions,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeds::item_rng;
use crate::systems::{Kernel, KernelKind, SystemClass, SystemSpec, TabulatedKernel};

/// How the `θ` entry of a frequency law is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaReading {
    #[default]
    Variance,
    StdDev,
}

/// `N` frequencies `|ω|`, `ω ~ N(0, θ)`, from stream `(seed, 0)`.
pub fn sample_frequencies<T: Real>(theta: T, count: usize, seed: u64) -> Result<Vec<T>> {
    sample_frequencies_with(theta, ThetaReading::Variance, count, seed, 0)
}

/// As [`sample_frequencies`] with an explicit reading of `θ` and stream index.
pub fn sample_frequencies_with<T: Real>(
    theta: T,
    reading: ThetaReading,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<T>> {
    if count == 0 {
        return Err(Error::Config("the number of features must be positive".into()));
    }
    let std = normal_std(theta, reading)?;
    let law = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = item_rng(seed, stream);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w: f64 = law.sample(&mut rng);
        if w != 0.0 {
            out.push(T::lit(w.abs()));
        }
    }
    Ok(out)
}

fn normal_std<T: Real>(theta: T, reading: ThetaReading) -> Result<f64> {
    let t = theta.to_f64_lossy();
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("frequency law parameter must be positive, got {theta}")));
    }
    Ok(match reading {
        ThetaReading::Variance => t.sqrt(),
        ThetaReading::StdDev => t,
    })
}

/// `α(ω, n) = 2ⁿ ω^{n+1} / π^{(n−1)/2}`.
pub fn alpha_normalization<T: Real>(omega: T, n: usize) -> Result<T> {
    if !(omega > T::zero()) || n == 0 {
        return Err(Error::Input(format!("alpha needs ω > 0 and n ≥ 1, got ω = {omega}, n = {n}")));
    }
    let nf = T::from_count(n);
    let v = T::lit(2.0).powi(n as i32) * omega.powi(n as i32 + 1) / T::PI().powf((nf - T::one()) / T::lit(2.0));
    if !v.is_finite() || v == T::zero() {
        return Err(Error::Numerical(format!("alpha({omega}, {n}) is not representable")));
    }
    Ok(v)
}

/// `β(ω) = √π / (2ω)`.
pub fn beta_normalization<T: Real>(omega: T) -> T {
    T::PI().sqrt() / (T::lit(2.0) * omega)
}

/// Contiguous column range of one `(a, b)` block of a heterogeneous basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Block {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    Radial,
    /// Random Fourier baseline with phases `b_k`.
    Fourier { phases: Vec<T> },
}

/// Sampled frequencies, their normalizations and (after training) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis<T> {
    pub class: SystemClass,
    pub omegas: Vec<T>,
    /// Per-feature normalization (`α`, `β`, or 1 for Fourier features).
    pub norms: Vec<T>,
    pub theta_variance: T,
    pub n_context: usize,
    pub seed: u64,
    pub family: Family<T>,
    /// Row-major 2×2 block layout for heterogeneous bases.
    pub blocks: Option<[[Block; 2]; 2]>,
    pub coefficients: Option<Vec<T>>,
    pub support: Option<Vec<usize>>,
}

impl<T: Real> FeatureBasis<T> {
    /// Radial basis for a homogeneous system of `n` agents.
    pub fn homogeneous(class: SystemClass, theta: T, reading: ThetaReading, count: usize, n: usize, seed: u64) -> Result<Self> {
        if class.is_heterogeneous() {
            return Err(Error::Config("use FeatureBasis::heterogeneous for typed systems".into()));
        }
        let omegas = sample_frequencies_with(theta, reading, count, seed, 0)?;
        let norms = omegas
            .iter()
            .map(|&w| match class {
                SystemClass::FirstOrderHomogeneous => alpha_normalization(w, n),
                _ => Ok(beta_normalization(w)),
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(FeatureBasis {
            class,
            omegas,
            norms,
            theta_variance: theta,
            n_context: n,
            seed,
            family: Family::Radial,
            blocks: None,
            coefficients: None,
            support: None,
        })
    }

    /// Radial basis with independent draws per `(a, b)` block of sizes `counts[a][b]`.
    pub fn heterogeneous(theta: T, reading: ThetaReading, counts: [[usize; 2]; 2], n: usize, seed: u64) -> Result<Self> {
        let mut omegas = Vec::new();
        let mut blocks = [[Block::default(); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let len = counts[a][b];
                blocks[a][b] = Block { offset: omegas.len(), len };
                if len > 0 {
                    omegas.extend(sample_frequencies_with(theta, reading, len, seed, (2 * a + b) as u64)?);
                }
            }
        }
        if omegas.is_empty() {
            return Err(Error::Config("the number of features must be positive".into()));
        }
        let norms = omegas.iter().map(|&w| beta_normalization(w)).collect();
        Ok(FeatureBasis {
            class: SystemClass::FirstOrderHeterogeneous,
            omegas,
            norms,
            theta_variance: theta,
            n_context: n,
            seed,
            family: Family::Radial,
            blocks: Some(blocks),
            coefficients: None,
            support: None,
        })
    }

    /// Random Fourier features: `ω ~ N(0, θ)` (signed), `b ~ U[0, 2π)`.
    pub fn fourier(theta: T, reading: ThetaReading, count: usize, n: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("the number of features must be positive".into()));
        }
        let law = Normal::new(0.0, normal_std(theta, reading)?).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = item_rng(seed, 0);
        let mut omegas = Vec::with_capacity(count);
        let mut phases = Vec::with_capacity(count);
        for _ in 0..count {
            omegas.push(T::lit(law.sample(&mut rng)));
            phases.push(T::lit(rng.random::<f64>() * 2.0 * PI));
        }
        Ok(FeatureBasis {
            class: SystemClass::FirstOrderHomogeneous,
            norms: vec![T::one(); count],
            omegas,
            theta_variance: theta,
            n_context: n,
            seed,
            family: Family::Fourier { phases },
            blocks: None,
            coefficients: None,
            support: None,
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Block `(a, b)`, or the whole basis for homogeneous systems.
    pub fn block(&self, a: usize, b: usize) -> Block {
        match &self.blocks {
            Some(g) => g[a][b],
            None => Block { offset: 0, len: self.len() },
        }
    }

    /// Attaches coefficients; off-support entries must be zero.
    pub fn with_coefficients(mut self, c: Vec<T>, support: Option<Vec<usize>>) -> Result<Self> {
        if c.len() != self.len() {
            return Err(Error::Config(format!("expected {} coefficients, got {}", self.len(), c.len())));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("coefficients must be finite".into()));
        }
        if let Some(s) = &support {
            let mut on = vec![false; c.len()];
            for &k in s {
                if k >= c.len() {
                    return Err(Error::Config(format!("support index {k} out of range")));
                }
                on[k] = true;
            }
            if c.iter().zip(&on).any(|(&v, &o)| !o && v != T::zero()) {
                return Err(Error::Config("coefficients must vanish off the support".into()));
            }
        }
        self.coefficients = Some(c);
        self.support = support;
        Ok(self)
    }

    fn coefficients_or_err(&self) -> Result<&[T]> {
        self.coefficients.as_deref().ok_or_else(|| Error::State("basis has no trained coefficients".into()))
    }

    /// Learned kernel of block `(a, b)`; only nonzero terms are retained.
    pub fn learned_kernel(&self, a: usize, b: usize) -> Result<LearnedKernel<T>> {
        let c = self.coefficients_or_err()?;
        let blk = self.block(a, b);
        let range = blk.offset..blk.offset + blk.len;
        let keep = |k: &usize| c[*k] != T::zero();
        let idx: Vec<usize> = match &self.support {
            Some(s) => s.iter().copied().filter(|k| range.contains(k)).filter(keep).collect(),
            None => range.clone().filter(keep).collect(),
        };
        let omegas = idx.iter().map(|&k| self.omegas[k]).collect();
        let weights = idx.iter().map(|&k| c[k] * self.norms[k]).collect();
        let phases = match &self.family {
            Family::Radial => None,
            Family::Fourier { phases } => Some(idx.iter().map(|&k| phases[k]).collect()),
        };
        Ok(LearnedKernel { omegas, weights, phases })
    }
}

/// `g_N(r) = Σ w_k e^{−r²ω_k²}` (radial) or `Σ w_k cos(ω_k r + b_k)` (Fourier),
/// where `w_k = c_k · norm_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedKernel<T> {
    pub omegas: Vec<T>,
    pub weights: Vec<T>,
    pub phases: Option<Vec<T>>,
}

impl<T: Real> LearnedKernel<T> {
    pub fn terms(&self) -> usize {
        self.omegas.len()
    }

    #[inline]
    pub fn eval(&self, r: T) -> T {
        match &self.phases {
            None => {
                let r2 = r * r;
                self.omegas.iter().zip(&self.weights).map(|(&w, &c)| c * (-r2 * w * w).exp()).sum()
            }
            Some(b) => self
                .omegas
                .iter()
                .zip(&self.weights)
                .zip(b)
                .map(|((&w, &c), &p)| c * (w * r + p).cos())
                .sum(),
        }
    }

    pub fn derivative(&self, r: T) -> T {
        match &self.phases {
            None => {
                let r2 = r * r;
                let two = T::lit(2.0);
                self.omegas.iter().zip(&self.weights).map(|(&w, &c)| -two * r * w * w * c * (-r2 * w * w).exp()).sum()
            }
            Some(b) => self
                .omegas
                .iter()
                .zip(&self.weights)
                .zip(b)
                .map(|((&w, &c), &p)| -c * w * (w * r + p).sin())
                .sum(),
        }
    }

    /// Cubic Hermite table with exact values and slopes at `nodes` points on
    /// `[start, end]`; radii outside fall back to exact evaluation.
    pub fn tabulate(self: &Arc<Self>, start: T, end: T, nodes: usize) -> Result<TabulatedKernel<T>> {
        if nodes < 2 || !(end > start) {
            return Err(Error::Config("tabulation needs two or more nodes on a non-empty range".into()));
        }
        let step = (end - start) / T::from_count(nodes - 1);
        let grid: Vec<T> = (0..nodes).map(|k| start + step * T::from_count(k)).collect();
        let t = TabulatedKernel {
            start,
            step,
            values: grid.iter().map(|&r| self.eval(r)).collect(),
            slopes: Some(grid.iter().map(|&r| self.derivative(r)).collect()),
            tail: Some(Arc::clone(self)),
        };
        t.validate()?;
        Ok(t)
    }
}

/// Evaluates the learned kernel of a homogeneous basis at `r`.
pub fn eval_learned_kernel<T: Real>(basis: &FeatureBasis<T>, r: T) -> Result<T> {
    if !r.is_finite() {
        return Err(Error::Input(format!("kernel radius must be finite, got {r}")));
    }
    Ok(basis.learned_kernel(0, 0)?.eval(r))
}

/// Optional tabulation of learned kernels used for long forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tabulation<T> {
    pub r_max: T,
    pub nodes: usize,
}

/// System with the same class, dimension and labels as `template`, driven by
/// the learned kernels of `basis`. Empty blocks become zero kernels.
pub fn build_learned_system<T: Real>(
    basis: &FeatureBasis<T>,
    template: &SystemSpec<T>,
    tabulation: Option<Tabulation<T>>,
) -> Result<SystemSpec<T>> {
    if basis.class != template.class {
        return Err(Error::Config(format!("basis is for a {} system, template is {}", basis.class, template.class)));
    }
    let make = |a: usize, b: usize| -> Result<Kernel<T>> {
        let k = Arc::new(basis.learned_kernel(a, b)?);
        if k.terms() == 0 {
            return Ok(Kernel::zero());
        }
        match tabulation {
            Some(tab) => {
                let t = k.tabulate(T::zero(), tab.r_max, tab.nodes)?;
                Ok(Kernel::new(KernelKind::Custom(Arc::new(t))))
            }
            None => Ok(Kernel::new(KernelKind::Learned(k))),
        }
    };
    let kernels = if template.class.is_heterogeneous() {
        if basis.blocks.is_none() {
            return Err(Error::Config("heterogeneous systems need a block-structured basis".into()));
        }
        vec![make(0, 0)?, make(0, 1)?, make(1, 0)?, make(1, 1)?]
    } else {
        vec![make(0, 0)?]
    };
    template.with_kernels(kernels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_and_beta_spot_values() {
        assert_relative_eq!(alpha_normalization(1.0f64, 1).unwrap(), 2.0);
        assert_relative_eq!(alpha_normalization(1.0f64, 2).unwrap(), 4.0 / PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(alpha_normalization(2.0f64, 2).unwrap(), 32.0 / PI.sqrt(), max_relative = 1e-15);
        assert!(alpha_normalization(1e200f64, 10).is_err());
        assert!(alpha_normalization(0.0f64, 2).is_err());
        assert_relative_eq!(beta_normalization(1.0f64), PI.sqrt() / 2.0);
        assert_relative_eq!(beta_normalization(PI.sqrt() / 2.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(beta_normalization(10.0f64), 0.088_622_692_545_275_8, max_relative = 1e-14);
    }

    #[test]
    fn frequencies() {
        let w: Vec<f64> = sample_frequencies(35.0, 100_000, 5).unwrap();
        assert!(w.iter().all(|&x| x > 0.0));
        assert_eq!(w, sample_frequencies(35.0, 100_000, 5).unwrap());
        let m2 = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        assert!((m2 / 35.0 - 1.0).abs() < 0.02, "{m2}");
        assert!(sample_frequencies::<f64>(35.0, 0, 5).is_err());
    }

    #[test]
    fn learned_kernel_spot_value() {
        let mut basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 1, 2, 0).unwrap();
        basis.omegas = vec![1.0];
        basis.norms = vec![alpha_normalization(1.0, 2).unwrap()];
        let basis = basis.with_coefficients(vec![1.0], None).unwrap();
        assert_relative_eq!(eval_learned_kernel(&basis, 0.0).unwrap(), 4.0 / PI.sqrt(), max_relative = 1e-15);
        let zero = basis.clone().with_coefficients(vec![0.0], None).unwrap();
        assert_eq!(eval_learned_kernel(&zero, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn off_support_coefficients_are_rejected() {
        let basis = FeatureBasis::<f64>::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 3, 2, 0).unwrap();
        assert!(basis.clone().with_coefficients(vec![1.0, 1.0, 0.0], Some(vec![0])).is_err());
        assert!(eval_learned_kernel(&basis, 1.0).is_err());
    }

    #[test]
    fn tabulation_tracks_exact_kernel() {
        let k: Arc<LearnedKernel<f64>> = Arc::new(LearnedKernel { omegas: vec![0.5, 1.3, 2.0], weights: vec![1.0, -0.4, 0.2], phases: None });
        let t = k.tabulate(0.0, 5.0, 2001).unwrap();
        for r in [0.0, 0.013, 1.7, 4.99, 7.0] {
            assert!((t.eval(r) - k.eval(r)).abs() < 1e-9);
        }
    }
}
