//! Explicit Runge–Kutta integration sampled at prescribed output times.
//!
//! The adaptive path is Dormand–Prince 5(4) with the classic
//! Hairer–Nørsett–Wanner step control and its 4th-order continuous
//! extension; outputs are interpolated, never snapped to the step grid.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A first-order autonomous or non-autonomous system `y' = f(t, y)`.
pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Real, F: Fn(T, &[T], &mut [T])> OdeSystem<T> for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method<T> {
    AdaptiveRK45,
    /// Classic RK4; each output interval is split into `ceil(Δ/step)` equal substeps.
    FixedRK4 { step: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub max_steps: usize,
    pub method: Method<T>,
    /// Runs whose rejected/accepted ratio exceeds this are flagged.
    pub rejection_flag_ratio: f64,
}

impl<T: Real> Default for IntegratorSettings<T> {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: T::lit(1e-5),
            abs_tol: T::lit(1e-6),
            max_step: T::infinity(),
            max_steps: 1_000_000,
            method: Method::AdaptiveRK45,
            rejection_flag_ratio: 0.5,
        }
    }
}

impl<T: Real> IntegratorSettings<T> {
    pub fn with_max_step(mut self, h: T) -> Self {
        self.max_step = h;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn fixed_rk4(step: T) -> Self {
        IntegratorSettings { method: Method::FixedRK4 { step }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return Err(Error::Config("integrator tolerances must be strictly positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.max_step > T::zero()) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if let Method::FixedRK4 { step } = self.method {
            if !(step > T::zero() && step.is_finite()) {
                return Err(Error::Config("fixed RK4 step must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Excessive step rejection; callers may want a smaller `max_step`.
    pub flagged: bool,
}

/// States at the requested times, stored row-major (`times.len() × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub times: Vec<T>,
    pub dim: usize,
    pub states: Vec<T>,
    pub stats: IntegrationStats,
}

impl<T: Real> Solution<T> {
    pub fn state(&self, j: usize) -> &[T] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates `system` from `(t0, y0)` and reports the state at every entry
/// of `times` (strictly increasing, all `≥ t0`).
pub fn integrate<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: &[T],
    times: &[T],
    settings: &IntegratorSettings<T>,
) -> Result<Solution<T>> {
    settings.validate()?;
    let dim = system.dim();
    if y0.len() != dim {
        return Err(Error::Input(format!("initial state has length {}, system expects {dim}", y0.len())));
    }
    if y0.iter().any(|v| !v.is_finite()) || !t0.is_finite() {
        return Err(Error::Input("initial state must be finite".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Input("output times must be finite".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("output times must be strictly increasing".into()));
    }
    if times.first().is_some_and(|&t| t < t0) {
        return Err(Error::Input("output times must not precede the initial time".into()));
    }
    let mut sol = Solution { times: times.to_vec(), dim, states: Vec::with_capacity(times.len() * dim), stats: IntegrationStats::default() };
    if times.is_empty() {
        return Ok(sol);
    }
    match settings.method {
        Method::AdaptiveRK45 => dopri5(system, t0, y0, times, settings, &mut sol)?,
        Method::FixedRK4 { step } => rk4(system, t0, y0, times, step, settings, &mut sol)?,
    }
    let ratio = sol.stats.rejected as f64 / sol.stats.accepted.max(1) as f64;
    sol.stats.flagged = ratio > settings.rejection_flag_ratio;
    Ok(sol)
}

fn fail<T: Real>(t: T, reason: &str) -> Error {
    Error::Integration { last_time: t.to_f64_lossy(), reason: reason.to_string() }
}

fn all_finite<T: Real>(y: &[T]) -> bool {
    y.iter().all(|v| v.is_finite())
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Tableau<T> {
    a: [T; 20],
    c: [T; 4],
    e: [T; 6],
    d: [T; 6],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let l = T::lit;
        Tableau {
            a: [
                l(A21), l(A31), l(A32), l(A41), l(A42), l(A43), l(A51), l(A52), l(A53), l(A54), l(A61), l(A62),
                l(A63), l(A64), l(A65), l(A71), l(A73), l(A74), l(A75), l(A76),
            ],
            c: [l(C2), l(C3), l(C4), l(C5)],
            e: [l(E1), l(E3), l(E4), l(E5), l(E6), l(E7)],
            d: [l(D1), l(D3), l(D4), l(D5), l(D6), l(D7)],
        }
    }
}

fn rms_norm<T: Real>(v: &[T], y: &[T], settings: &IntegratorSettings<T>) -> T {
    let n = T::from_count(v.len().max(1));
    let s: T = v
        .iter()
        .zip(y)
        .map(|(&x, &yi)| {
            let sk = settings.abs_tol + settings.rel_tol * yi.abs();
            (x / sk) * (x / sk)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: &[T],
    f0: &[T],
    hmax: T,
    settings: &IntegratorSettings<T>,
    stats: &mut IntegrationStats,
) -> T {
    let d0 = rms_norm(y0, y0, settings);
    let d1 = rms_norm(f0, y0, settings);
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0 = h0.min(hmax);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(&y, &f)| y + h0 * f).collect();
    let mut f1 = vec![T::zero(); y0.len()];
    system.rhs(t0 + h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = rms_norm(&diff, y0, settings) / h0;
    let dm = d1.max(d2);
    let h1 = if !(dm > T::lit(1e-15)) {
        T::lit(1e-6).max(h0 * T::lit(1e-3))
    } else {
        (T::lit(0.01) / dm).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(hmax)
}

fn dopri5<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: &[T],
    times: &[T],
    settings: &IntegratorSettings<T>,
    sol: &mut Solution<T>,
) -> Result<()> {
    let n = y0.len();
    let tb = Tableau::<T>::new();
    let a = &tb.a;
    let t_end = *times.last().unwrap();
    let hmax = settings.max_step.min(t_end - t0).max(T::min_positive_value());
    let (safe, facmin, facmax) = (T::lit(0.9), T::lit(0.2), T::lit(10.0));

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::zero(); n]);
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    let mut err_v = vec![T::zero(); n];
    let mut dense: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); n]);

    let mut next_out = 0;
    while next_out < times.len() && times[next_out] <= t {
        sol.states.extend_from_slice(&y);
        next_out += 1;
    }
    if next_out == times.len() {
        return Ok(());
    }

    system.rhs(t, &y, &mut k[0]);
    sol.stats.rhs_evals += 1;
    if !all_finite(&k[0]) {
        return Err(fail(t, "non-finite derivative at the initial state"));
    }
    let mut h = initial_step(system, t, &y, &k[0], hmax, settings, &mut sol.stats);
    let mut last_rejected = false;
    let mut steps = 0usize;

    while next_out < times.len() {
        if steps >= settings.max_steps {
            return Err(fail(t, "maximum number of steps exceeded"));
        }
        if h.abs() <= T::lit(16.0) * T::epsilon() * t.abs() || h.abs() < T::min_positive_value() {
            return Err(fail(t, "step size underflow"));
        }
        let mut last = false;
        if t + T::lit(1.01) * h >= t_end {
            h = t_end - t;
            last = true;
        }
        steps += 1;

        macro_rules! stage {
            ($out:expr, $c:expr, [$(($ai:expr, $ki:expr)),*]) => {{
                for i in 0..n {
                    ytmp[i] = y[i] + h * (T::zero() $(+ a[$ai] * k[$ki][i])*);
                }
                system.rhs(t + $c * h, &ytmp, &mut k[$out]);
            }};
        }
        stage!(1, tb.c[0], [(0, 0)]);
        stage!(2, tb.c[1], [(1, 0), (2, 1)]);
        stage!(3, tb.c[2], [(3, 0), (4, 1), (5, 2)]);
        stage!(4, tb.c[3], [(6, 0), (7, 1), (8, 2), (9, 3)]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (a[10] * k[0][i] + a[11] * k[1][i] + a[12] * k[2][i] + a[13] * k[3][i] + a[14] * k[4][i]);
        }
        system.rhs(t + h, &ytmp, &mut k[5]);
        for i in 0..n {
            ynew[i] = y[i] + h * (a[15] * k[0][i] + a[16] * k[2][i] + a[17] * k[3][i] + a[18] * k[4][i] + a[19] * k[5][i]);
        }
        system.rhs(t + h, &ynew, &mut k[6]);
        sol.stats.rhs_evals += 6;

        let e = &tb.e;
        for i in 0..n {
            err_v[i] = h
                * (e[0] * k[0][i] + e[1] * k[2][i] + e[2] * k[3][i] + e[3] * k[4][i] + e[4] * k[5][i] + e[5] * k[6][i]);
        }
        let nn = T::from_count(n.max(1));
        let err = (err_v
            .iter()
            .zip(y.iter().zip(&ynew))
            .map(|(&ev, (&y0i, &y1i))| {
                let sk = settings.abs_tol + settings.rel_tol * y0i.abs().max(y1i.abs());
                (ev / sk) * (ev / sk)
            })
            .sum::<T>()
            / nn)
            .sqrt();

        if !err.is_finite() || !all_finite(&ynew) {
            sol.stats.rejected += 1;
            last_rejected = true;
            h = h * facmin;
            continue;
        }

        let fac = if err > T::zero() { safe * err.powf(T::lit(-0.2)) } else { facmax };
        if err <= T::one() {
            let d = &tb.d;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                dense[0][i] = y[i];
                dense[1][i] = ydiff;
                dense[2][i] = bspl;
                dense[3][i] = ydiff - h * k[6][i] - bspl;
                dense[4][i] = h
                    * (d[0] * k[0][i] + d[1] * k[2][i] + d[2] * k[3][i] + d[3] * k[4][i] + d[4] * k[5][i] + d[5] * k[6][i]);
            }
            let t_old = t;
            t = if last { t_end } else { t + h };
            while next_out < times.len() && times[next_out] <= t {
                let tout = times[next_out];
                if tout == t {
                    sol.states.extend_from_slice(&ynew);
                } else {
                    let theta = (tout - t_old) / h;
                    let theta1 = T::one() - theta;
                    for i in 0..n {
                        let v = dense[0][i]
                            + theta * (dense[1][i] + theta1 * (dense[2][i] + theta * (dense[3][i] + theta1 * dense[4][i])));
                        sol.states.push(v);
                    }
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            sol.stats.accepted += 1;
            let cap = if last_rejected { T::one() } else { facmax };
            h = (h * fac.min(cap).max(facmin)).min(hmax);
            last_rejected = false;
        } else {
            sol.stats.rejected += 1;
            last_rejected = true;
            h = h * fac.min(T::one()).max(facmin);
        }
    }
    Ok(())
}

fn rk4<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: &[T],
    times: &[T],
    step: T,
    settings: &IntegratorSettings<T>,
    sol: &mut Solution<T>,
) -> Result<()> {
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let mut steps = 0;
    for &tout in times {
        let span = tout - t;
        if span > T::zero() {
            let m = (span / step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
            let h = span / T::from_count(m);
            for sub in 0..m {
                if steps >= settings.max_steps {
                    return Err(fail(t, "maximum number of steps exceeded"));
                }
                steps += 1;
                let ts = t + h * T::from_count(sub);
                system.rhs(ts, &y, &mut k1);
                for i in 0..n {
                    tmp[i] = y[i] + half * h * k1[i];
                }
                system.rhs(ts + half * h, &tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + half * h * k2[i];
                }
                system.rhs(ts + half * h, &tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + h * k3[i];
                }
                system.rhs(ts + h, &tmp, &mut k4);
                for i in 0..n {
                    y[i] += h * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
                }
                if !all_finite(&y) {
                    return Err(fail(ts, "state became non-finite"));
                }
                sol.stats.accepted += 1;
                sol.stats.rhs_evals += 4;
            }
            t = tout;
        }
        sol.states.extend_from_slice(&y);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem { dim: 1, f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] }
    }

    #[test]
    fn exponential_decay() {
        let sol = integrate(&decay(), 0.0, &[1.0], &[0.25, 0.5, 1.0], &IntegratorSettings::default()).unwrap();
        assert!((sol.state(2)[0] - (-1f64).exp()).abs() < 1e-5);
        assert!((sol.state(0)[0] - (-0.25f64).exp()).abs() < 1e-5);
        assert_eq!(sol.times, vec![0.25, 0.5, 1.0]);
    }

    #[test]
    fn initial_time_is_reported_verbatim() {
        let sol = integrate(&decay(), 0.0, &[1.0], &[0.0, 1.0], &IntegratorSettings::default()).unwrap();
        assert_eq!(sol.state(0), &[1.0]);
    }

    #[test]
    fn zero_field_is_constant() {
        let sys = FnSystem { dim: 2, f: |_t: f64, _y: &[f64], dy: &mut [f64]| dy.fill(0.0) };
        let sol = integrate(&sys, 0.0, &[3.0, -1.0], &[0.5, 1.0, 7.0], &IntegratorSettings::default()).unwrap();
        assert!(sol.states.chunks(2).all(|s| s == [3.0, -1.0]));
    }

    #[test]
    fn adaptive_error_respects_tolerance() {
        let s = IntegratorSettings::default().with_tolerances(1e-8, 1e-10);
        let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.125).collect();
        let sol = integrate(&decay(), 0.0, &[1.0], &times, &s).unwrap();
        for (j, &t) in times.iter().enumerate() {
            assert!((sol.state(j)[0] - (-t).exp()).abs() < 10.0 * (1e-10 + 1e-8));
        }
    }

    #[test]
    fn rk4_order() {
        let err = |h: f64| {
            let sol = integrate(&decay(), 0.0, &[1.0], &[1.0, 2.0], &IntegratorSettings::fixed_rk4(h)).unwrap();
            (sol.state(1)[0] - (-2f64).exp()).abs()
        };
        assert!(err(0.1) / err(0.05) >= 16.0 * 0.8);
    }

    #[test]
    fn blow_up_reports_last_time() {
        let sys = FnSystem { dim: 1, f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0] };
        let s = IntegratorSettings { max_steps: 10_000, ..Default::default() };
        match integrate(&sys, 0.0, &[1.0], &[2.0], &s) {
            Err(Error::Integration { last_time, reason }) => assert!(last_time < 1.01 && last_time > 0.5, "{last_time} {reason}"),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let s = IntegratorSettings::default();
        assert!(integrate(&decay(), 0.0, &[1.0], &[1.0, 0.5], &s).is_err());
        assert!(integrate(&decay(), 1.0, &[1.0], &[0.5], &s).is_err());
        assert!(integrate(&decay(), 0.0, &[f64::NAN], &[0.5], &s).is_err());
        let bad = IntegratorSettings { rel_tol: 0.0, ..s };
        assert!(integrate(&decay(), 0.0, &[1.0], &[0.5], &bad).is_err());
    }

    #[test]
    fn deterministic() {
        let times = [0.1, 0.7, 3.0];
        let a = integrate(&decay(), 0.0, &[1.0], &times, &IntegratorSettings::default()).unwrap();
        let b = integrate(&decay(), 0.0, &[1.0], &times, &IntegratorSettings::default()).unwrap();
        assert_eq!(a, b);
    }
}
