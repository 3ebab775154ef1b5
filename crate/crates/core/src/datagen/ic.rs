use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeds::{item_rng, Rng};
use crate::systems::{AgentState, SystemSpec};

/// Distribution of a single agent's position (or velocity).
#[derive(Debug, Clone, PartialEq)]
pub enum IcKind<T> {
    /// Independent standard normal coordinates.
    GaussianStandard,
    /// Uniform on a box; `lo`/`hi` hold one bound per dimension or a single
    /// bound shared by all dimensions.
    UniformBox { lo: Vec<T>, hi: Vec<T> },
    /// Uniform (by volume) on the shell `r_min ≤ |x − center| ≤ r_max`.
    UniformRing { r_min: T, r_max: T, center: Vec<T> },
    /// Uniform (by volume) on a ball.
    UniformDisk { radius: T, center: Vec<T> },
    /// Uniform in arclength on a heart curve whose farthest point lies `scale` from `center`.
    HeartCurve { scale: T, center: Vec<T> },
    /// Uniform on `[x.0, x.1] × [y.0, y.1]`.
    UniformStrip { x: (T, T), y: (T, T) },
}

impl<T: Real> IcKind<T> {
    pub fn uniform_cube(lo: T, hi: T) -> Self {
        IcKind::UniformBox { lo: vec![lo], hi: vec![hi] }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let center_ok = |c: &Vec<T>| c.is_empty() || c.len() == d;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match self {
            IcKind::GaussianStandard => Ok(()),
            IcKind::UniformBox { lo, hi } => {
                let ok_len = |v: &Vec<T>| v.len() == 1 || v.len() == d;
                if !ok_len(lo) || !ok_len(hi) || lo.len() != hi.len() {
                    return bad("box bounds must have one entry or one per dimension");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("box bounds require lo < hi");
                }
                Ok(())
            }
            IcKind::UniformRing { r_min, r_max, center } => {
                if !(*r_min >= T::zero() && r_min < r_max) {
                    return bad("ring requires 0 ≤ r_min < r_max");
                }
                if !center_ok(center) {
                    return bad("ring center has the wrong dimension");
                }
                Ok(())
            }
            IcKind::UniformDisk { radius, center } => {
                if !(*radius > T::zero()) {
                    return bad("disk radius must be positive");
                }
                if !center_ok(center) {
                    return bad("disk center has the wrong dimension");
                }
                Ok(())
            }
            IcKind::HeartCurve { scale, center } => {
                if d != 2 {
                    return bad("the heart curve is only defined in two dimensions");
                }
                if !(*scale > T::zero()) || !center_ok(center) {
                    return bad("heart curve needs a positive scale and a 2-d center");
                }
                Ok(())
            }
            IcKind::UniformStrip { x, y } => {
                if d != 2 {
                    return bad("the strip law is only defined in two dimensions");
                }
                if !(x.0 < x.1 && y.0 < y.1) {
                    return bad("strip ranges require lo < hi");
                }
                Ok(())
            }
        }
    }

    /// Appends one `d`-dimensional draw to `out`.
    pub fn sample_into(&self, d: usize, rng: &mut Rng, out: &mut Vec<T>) {
        let at = |c: &Vec<T>, k: usize| if c.is_empty() { T::zero() } else { c[k] };
        match self {
            IcKind::GaussianStandard => {
                for _ in 0..d {
                    out.push(T::lit(StandardNormal.sample(rng)));
                }
            }
            IcKind::UniformBox { lo, hi } => {
                for k in 0..d {
                    let (a, b) = if lo.len() == 1 { (lo[0], hi[0]) } else { (lo[k], hi[k]) };
                    out.push(uniform(rng, a, b));
                }
            }
            IcKind::UniformRing { r_min, r_max, center } => {
                let r = radial_draw(rng, d, *r_min, *r_max);
                push_direction(rng, d, r, |k| at(center, k), out);
            }
            IcKind::UniformDisk { radius, center } => {
                let r = radial_draw(rng, d, T::zero(), *radius);
                push_direction(rng, d, r, |k| at(center, k), out);
            }
            IcKind::HeartCurve { scale, center } => {
                let (x, y) = heart_table().sample(rng.random::<f64>());
                out.push(at(center, 0) + *scale * T::lit(x));
                out.push(at(center, 1) + *scale * T::lit(y));
            }
            IcKind::UniformStrip { x, y } => {
                out.push(uniform(rng, x.0, x.1));
                out.push(uniform(rng, y.0, y.1));
            }
        }
    }
}

fn uniform<T: Real>(rng: &mut Rng, a: T, b: T) -> T {
    a + (b - a) * T::lit(rng.random::<f64>())
}

/// Radius of a volume-uniform draw from the shell `[r0, r1]` in `d` dimensions.
fn radial_draw<T: Real>(rng: &mut Rng, d: usize, r0: T, r1: T) -> T {
    let p = d as i32;
    let (lo, hi) = (r0.powi(p), r1.powi(p));
    (lo + (hi - lo) * T::lit(rng.random::<f64>())).powf(T::from_count(d).recip())
}

fn push_direction<T: Real>(rng: &mut Rng, d: usize, r: T, center: impl Fn(usize) -> T, out: &mut Vec<T>) {
    let g: Vec<f64> = loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if g.iter().any(|&v| v != 0.0) {
            break g;
        }
    };
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (k, v) in g.iter().enumerate() {
        out.push(center(k) + r * T::lit(v / norm));
    }
}

/// Arclength table of the heart curve, normalized to unit maximal radius.
struct HeartTable {
    points: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

const HEART_SEGMENTS: usize = 8192;

fn heart_point(theta: f64) -> (f64, f64) {
    let s = theta.sin();
    let x = 16.0 * s * s * s;
    let y = 13.0 * theta.cos() - 5.0 * (2.0 * theta).cos() - 2.0 * (3.0 * theta).cos() - (4.0 * theta).cos();
    (x / 16.0, y / 16.0)
}

fn heart_table() -> &'static HeartTable {
    static TABLE: std::sync::OnceLock<HeartTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let raw: Vec<(f64, f64)> = (0..=HEART_SEGMENTS)
            .map(|k| heart_point(std::f64::consts::TAU * k as f64 / HEART_SEGMENTS as f64))
            .collect();
        let rmax = raw.iter().map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
        let points: Vec<(f64, f64)> = raw.iter().map(|(x, y)| (x / rmax, y / rmax)).collect();
        let mut cumulative = vec![0.0; points.len()];
        for k in 1..points.len() {
            let (a, b) = (points[k - 1], points[k]);
            cumulative[k] = cumulative[k - 1] + (b.0 - a.0).hypot(b.1 - a.1);
        }
        HeartTable { points, cumulative }
    })
}

impl HeartTable {
    fn sample(&self, u: f64) -> (f64, f64) {
        let total = *self.cumulative.last().unwrap();
        let s = u * total;
        let k = self.cumulative.partition_point(|&c| c <= s).clamp(1, self.points.len() - 1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let w = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        let (a, b) = (self.points[k - 1], self.points[k]);
        (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
    }
}

/// Initial-condition law: one position law per agent type and, for
/// second-order systems, a velocity law.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditionLaw<T> {
    pub positions: Vec<IcKind<T>>,
    pub velocities: Option<IcKind<T>>,
}

impl<T: Real> InitialConditionLaw<T> {
    pub fn new(position: IcKind<T>) -> Self {
        InitialConditionLaw { positions: vec![position], velocities: None }
    }

    pub fn per_type(type1: IcKind<T>, type2: IcKind<T>) -> Self {
        InitialConditionLaw { positions: vec![type1, type2], velocities: None }
    }

    pub fn with_velocities(mut self, law: IcKind<T>) -> Self {
        self.velocities = Some(law);
        self
    }

    pub fn validate(&self, spec: &SystemSpec<T>) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Config("initial-condition law has no position law".into()));
        }
        let needed = if spec.class.is_heterogeneous() { 2 } else { 1 };
        if self.positions.len() != 1 && self.positions.len() != needed {
            return Err(Error::Config(format!("expected 1 or {needed} position laws, got {}", self.positions.len())));
        }
        for law in &self.positions {
            law.validate(spec.d)?;
        }
        match (&self.velocities, spec.class.is_second_order()) {
            (None, true) => Err(Error::Config("second-order systems need a velocity law".into())),
            (Some(v), true) => v.validate(spec.d),
            _ => Ok(()),
        }
    }

    /// Draws one initial condition from an already positioned generator.
    pub fn sample_one(&self, spec: &SystemSpec<T>, rng: &mut Rng) -> AgentState<T> {
        let mut x = Vec::with_capacity(spec.n * spec.d);
        for i in 0..spec.n {
            let t = spec.type_of(i).min(self.positions.len() - 1);
            self.positions[t].sample_into(spec.d, rng, &mut x);
        }
        let v = self.velocities.as_ref().filter(|_| spec.class.is_second_order()).map(|law| {
            let mut v = Vec::with_capacity(spec.n * spec.d);
            for _ in 0..spec.n {
                law.sample_into(spec.d, rng, &mut v);
            }
            v
        });
        AgentState { positions: x, velocities: v, time: T::zero() }
    }
}

/// `count` independent initial conditions; draw `ℓ` uses its own stream `(seed, ℓ)`.
pub fn sample_initial_conditions<T: Real>(
    law: &InitialConditionLaw<T>,
    count: usize,
    spec: &SystemSpec<T>,
    seed: u64,
) -> Result<Vec<AgentState<T>>> {
    if count == 0 {
        return Err(Error::Config("at least one initial condition is required".into()));
    }
    law.validate(spec)?;
    Ok((0..count).map(|l| law.sample_one(spec, &mut item_rng(seed, l as u64))).collect())
}
