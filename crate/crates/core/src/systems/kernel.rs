use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::LearnedKernel;
use crate::scalar::Real;

pub const DEFAULT_DOMAIN_FLOOR: f64 = 1e-6;

/// Closed-form, learned or tabulated pairwise interaction kernel `g(r)`.
#[derive(Debug, Clone)]
pub enum KernelKind<T: Real> {
    /// `g(r) = G'(r)/r` for `G(r) = 4ε[(σ/r)^12 − (σ/r)^6]`.
    LennardJones { epsilon: T, sigma: T },
    /// `g(r) = (1 + r²)^(-1/4)`.
    CuckerSmale,
    /// `1 − r⁻²`
    PreyPrey,
    /// `−2 r⁻²`
    PreyPredator,
    /// `3.5 r⁻³`
    PredatorPrey,
    /// identically zero
    PredatorPredator,
    /// `−1.2 / (r⁴/4 + 0.05) + 0.02`
    SheepSheep,
    /// `65 exp(−r / 0.45)`
    SheepFoodAttraction,
    Zero,
    Constant(T),
    Learned(Arc<LearnedKernel<T>>),
    Custom(Arc<TabulatedKernel<T>>),
}

/// A kernel together with its singularity guard.
#[derive(Debug, Clone)]
pub struct Kernel<T: Real> {
    pub kind: KernelKind<T>,
    /// Radii at or below this value are evaluated at the floor.
    pub domain_floor: T,
}

impl<T: Real> Kernel<T> {
    pub fn new(kind: KernelKind<T>) -> Self {
        Kernel { kind, domain_floor: T::lit(DEFAULT_DOMAIN_FLOOR) }
    }

    pub fn with_floor(mut self, floor: T) -> Self {
        self.domain_floor = floor;
        self
    }

    pub fn zero() -> Self {
        Self::new(KernelKind::Zero)
    }

    pub fn constant(c: T) -> Self {
        Self::new(KernelKind::Constant(c))
    }

    pub fn lennard_jones(epsilon: T, sigma: T) -> Self {
        Self::new(KernelKind::LennardJones { epsilon, sigma })
    }

    /// True when the closed form carries a negative power of `r`.
    pub fn is_singular(&self) -> bool {
        matches!(
            self.kind,
            KernelKind::LennardJones { .. }
                | KernelKind::PreyPrey
                | KernelKind::PreyPredator
                | KernelKind::PredatorPrey
        )
    }

    /// True when the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            KernelKind::Zero | KernelKind::PredatorPredator => true,
            KernelKind::Constant(c) => *c == T::zero(),
            _ => false,
        }
    }

    /// Checked evaluation; rejects non-finite radii.
    pub fn eval(&self, r: T) -> Result<T> {
        if !r.is_finite() {
            return Err(Error::Input(format!("kernel radius must be finite, got {r}")));
        }
        Ok(self.eval_guarded(r).0)
    }

    /// Evaluation on the hot path. Returns the value and whether the radius
    /// was clamped to the domain floor.
    #[inline]
    pub fn eval_guarded(&self, r: T) -> (T, bool) {
        let r = r.abs();
        let singular = self.is_singular();
        let clamped = singular && r <= self.domain_floor;
        let r = if clamped { self.domain_floor } else { r };
        (self.eval_raw(r), clamped)
    }

    #[inline]
    fn eval_raw(&self, r: T) -> T {
        match &self.kind {
            KernelKind::LennardJones { epsilon, sigma } => {
                let s2 = (*sigma / r).powi(2);
                let s6 = s2 * s2 * s2;
                let four = T::lit(4.0);
                four * *epsilon * (T::lit(-12.0) * s6 * s6 + T::lit(6.0) * s6) / (r * r)
            }
            KernelKind::CuckerSmale => (T::one() + r * r).powf(T::lit(-0.25)),
            KernelKind::PreyPrey => T::one() - (r * r).recip(),
            KernelKind::PreyPredator => T::lit(-2.0) / (r * r),
            KernelKind::PredatorPrey => T::lit(3.5) / (r * r * r),
            KernelKind::PredatorPredator | KernelKind::Zero => T::zero(),
            KernelKind::SheepSheep => {
                let r2 = r * r;
                T::lit(-1.2) / (r2 * r2 / T::lit(4.0) + T::lit(0.05)) + T::lit(0.02)
            }
            KernelKind::SheepFoodAttraction => T::lit(65.0) * (-r / T::lit(0.45)).exp(),
            KernelKind::Constant(c) => *c,
            KernelKind::Learned(k) => k.eval(r),
            KernelKind::Custom(t) => t.eval(r),
        }
    }

    /// Short machine-readable identifier, used in reports and config files.
    pub fn name(&self) -> String {
        match &self.kind {
            KernelKind::LennardJones { epsilon, sigma } => format!("lennard-jones({epsilon},{sigma})"),
            KernelKind::CuckerSmale => "cucker-smale".into(),
            KernelKind::PreyPrey => "prey-prey".into(),
            KernelKind::PreyPredator => "prey-predator".into(),
            KernelKind::PredatorPrey => "predator-prey".into(),
            KernelKind::PredatorPredator => "predator-predator".into(),
            KernelKind::SheepSheep => "sheep-sheep".into(),
            KernelKind::SheepFoodAttraction => "sheep-food".into(),
            KernelKind::Zero => "zero".into(),
            KernelKind::Constant(c) => format!("constant({c})"),
            KernelKind::Learned(_) => "learned".into(),
            KernelKind::Custom(_) => "tabulated".into(),
        }
    }
}

/// Kernel sampled on a uniform grid `start + k·step`, interpolated by cubic
/// Hermite polynomials when slopes are known and linearly otherwise.
///
/// Outside the grid the `tail` kernel is used when present; otherwise the
/// nearest end value is held constant.
#[derive(Debug, Clone)]
pub struct TabulatedKernel<T: Real> {
    pub start: T,
    pub step: T,
    pub values: Vec<T>,
    pub slopes: Option<Vec<T>>,
    pub tail: Option<Arc<LearnedKernel<T>>>,
}

impl<T: Real> TabulatedKernel<T> {
    pub fn linear(start: T, step: T, values: Vec<T>) -> Result<Self> {
        let t = TabulatedKernel { start, step, values, slopes: None, tail: None };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::Config("tabulated kernel needs at least two nodes".into()));
        }
        if !(self.step > T::zero()) || !self.start.is_finite() {
            return Err(Error::Config("tabulated kernel grid must be finite and increasing".into()));
        }
        if let Some(s) = &self.slopes {
            if s.len() != self.values.len() {
                return Err(Error::Config("slope table length differs from value table".into()));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tabulated kernel values must be finite".into()));
        }
        Ok(())
    }

    pub fn end(&self) -> T {
        self.start + self.step * T::from_count(self.values.len() - 1)
    }

    pub fn eval(&self, r: T) -> T {
        let last = self.values.len() - 1;
        if r < self.start || r > self.end() {
            if let Some(tail) = &self.tail {
                return tail.eval(r);
            }
            return if r < self.start { self.values[0] } else { self.values[last] };
        }
        let u = (r - self.start) / self.step;
        let k = u.floor().to_usize().unwrap_or(0).min(last - 1);
        let s = u - T::from_count(k);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        match &self.slopes {
            None => y0 + (y1 - y0) * s,
            Some(m) => {
                let (m0, m1) = (m[k] * self.step, m[k + 1] * self.step);
                let s2 = s * s;
                let s3 = s2 * s;
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                (two * s3 - three * s2 + T::one()) * y0
                    + (s3 - two * s2 + s) * m0
                    + (three * s2 - two * s3) * y1
                    + (s3 - s2) * m1
            }
        }
    }
}

/// Scalar pair potential `G(r)` with derivative `G'(r)`.
pub trait Potential<T: Real> {
    fn value(&self, r: T) -> T;
    fn derivative(&self, r: T) -> T;
}

#[derive(Debug, Clone, Copy)]
pub struct LennardJonesPotential<T> {
    pub epsilon: T,
    pub sigma: T,
}

impl<T: Real> Potential<T> for LennardJonesPotential<T> {
    fn value(&self, r: T) -> T {
        let s6 = (self.sigma / r).powi(6);
        T::lit(4.0) * self.epsilon * (s6 * s6 - s6)
    }

    fn derivative(&self, r: T) -> T {
        let s6 = (self.sigma / r).powi(6);
        T::lit(4.0) * self.epsilon * (T::lit(-12.0) * s6 * s6 + T::lit(6.0) * s6) / r
    }
}

/// `G(r) = k r²/2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticPotential<T> {
    pub stiffness: T,
}

impl<T: Real> Potential<T> for QuadraticPotential<T> {
    fn value(&self, r: T) -> T {
        self.stiffness * r * r / T::lit(2.0)
    }
    fn derivative(&self, r: T) -> T {
        self.stiffness * r
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential<T>(pub T);

impl<T: Real> Potential<T> for ConstantPotential<T> {
    fn value(&self, _r: T) -> T {
        self.0
    }
    fn derivative(&self, _r: T) -> T {
        T::zero()
    }
}

/// Arbitrary potential given as a closure; the derivative is a central
/// difference with a step scaled to `r`.
pub struct SampledPotential<F>(pub F);

impl<T: Real, F: Fn(T) -> T> Potential<T> for SampledPotential<F> {
    fn value(&self, r: T) -> T {
        (self.0)(r)
    }
    fn derivative(&self, r: T) -> T {
        let h = T::epsilon().cbrt() * r.abs().max(T::one());
        ((self.0)(r + h) - (self.0)(r - h)) / (h + h)
    }
}

/// Value of `g(r) = G'(r)/r` together with a clamp flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialKernelValue<T> {
    pub value: T,
    pub clamped: bool,
}

/// Interaction kernel induced by a pair potential through `g(r) = G'(r)/r`.
pub fn kernel_from_potential<T: Real, P: Potential<T>>(
    potential: &P,
    r: T,
    domain_floor: T,
) -> Result<PotentialKernelValue<T>> {
    if !r.is_finite() {
        return Err(Error::Input(format!("radius must be finite, got {r}")));
    }
    let clamped = r <= domain_floor;
    let r = if clamped { domain_floor } else { r };
    Ok(PotentialKernelValue { value: potential.derivative(r) / r, clamped })
}
