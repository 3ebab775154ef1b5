//! Plain-text exchange formats: trajectory datasets, trained bases and
//! kernel curves. Numbers are written with 17 significant digits so `f64`
//! values survive a round trip bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::datagen::{RadialDensity, TrajectorySet};
use crate::error::{Error, Result};
use crate::features::{alpha_normalization, beta_normalization, Block, FeatureBasis, Family};
use crate::scalar::Real;
use crate::systems::{Kernel, SystemClass};

fn num<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

fn parse_num<T: Real>(s: &str, line: usize) -> Result<T> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse { line, message: format!("`{s}` is not a number") })?;
    Ok(T::lit(v))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse { line, message: format!("`{s}` is not a non-negative integer") })
}

/// Optional annotations of a dataset file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DatasetMeta {
    /// Index of the last timestamp inside the training window.
    pub transition_step: Option<usize>,
}

pub fn write_dataset<T: Real>(traj: &TrajectorySet<T>, meta: &DatasetMeta) -> String {
    let (d, n, jn, l) = (traj.d, traj.n, traj.num_times(), traj.num_trajectories());
    let mut s = String::with_capacity(64 + l * jn * n * (40 + 25 * d));
    let t_end = traj.times.last().copied().unwrap_or(T::zero());
    let _ = writeln!(s, "#d={d}");
    let _ = writeln!(s, "#n={n}");
    let _ = writeln!(s, "#J={jn}");
    let _ = writeln!(s, "#L={l}");
    let _ = writeln!(s, "#T={}", num(t_end));
    let _ = writeln!(s, "#class={}", traj.class);
    let types: Vec<String> = (0..n).map(|i| (traj.type_of(i) + 1).to_string()).collect();
    let _ = writeln!(s, "#types={}", types.join(" "));
    if let Some(j) = meta.transition_step {
        let _ = writeln!(s, "#transition_step={j}");
        let _ = writeln!(s, "#transition_time={}", num(traj.times[j]));
    }
    s.push_str("traj,step,time,agent,type");
    for k in 1..=d {
        let _ = write!(s, ",x_{k}");
    }
    let vel = traj.velocities.is_some();
    if vel {
        for k in 1..=d {
            let _ = write!(s, ",v_{k}");
        }
    }
    s.push('\n');
    for li in 0..l {
        for j in 0..jn {
            let x = traj.frame(li, j);
            let v = traj.velocity_frame(li, j);
            for i in 0..n {
                let _ = write!(s, "{li},{j},{},{i},{}", num(traj.times[j]), traj.type_of(i) + 1);
                for k in 0..d {
                    let _ = write!(s, ",{}", num(x[i * d + k]));
                }
                if let Some(v) = v {
                    for k in 0..d {
                        let _ = write!(s, ",{}", num(v[i * d + k]));
                    }
                }
                s.push('\n');
            }
        }
    }
    s
}

fn header<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.strip_prefix('#')?.strip_prefix(key)?.strip_prefix('=')
}

pub fn read_dataset<T: Real>(text: &str) -> Result<(TrajectorySet<T>, DatasetMeta)> {
    let mut d = None;
    let mut n = None;
    let mut jn = None;
    let mut l = None;
    let mut class = None;
    let mut types: Option<Vec<usize>> = None;
    let mut meta = DatasetMeta::default();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(no, line)) = lines.peek() {
        let no = no + 1;
        if !line.starts_with('#') {
            break;
        }
        lines.next();
        if let Some(v) = header(line, "d") {
            d = Some(parse_usize(v, no)?);
        } else if let Some(v) = header(line, "n") {
            n = Some(parse_usize(v, no)?);
        } else if let Some(v) = header(line, "J") {
            jn = Some(parse_usize(v, no)?);
        } else if let Some(v) = header(line, "L") {
            l = Some(parse_usize(v, no)?);
        } else if let Some(v) = header(line, "class") {
            class = Some(SystemClass::from_str(v).map_err(|e| Error::Parse { line: no, message: e.to_string() })?);
        } else if let Some(v) = header(line, "types") {
            let t = v
                .split_whitespace()
                .map(|t| match t {
                    "1" => Ok(0),
                    "2" => Ok(1),
                    other => Err(Error::Parse { line: no, message: format!("agent type `{other}` is not 1 or 2") }),
                })
                .collect::<Result<Vec<_>>>()?;
            types = Some(t);
        } else if let Some(v) = header(line, "transition_step") {
            meta.transition_step = Some(parse_usize(v, no)?);
        }
    }
    let missing = |k: &str| Error::Parse { line: 1, message: format!("missing header `#{k}=`") };
    let d = d.ok_or_else(|| missing("d"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let jn = jn.ok_or_else(|| missing("J"))?;
    let l = l.ok_or_else(|| missing("L"))?;
    let class = class.ok_or_else(|| missing("class"))?;
    let types = types.unwrap_or_else(|| vec![0; n]);
    if types.len() != n {
        return Err(Error::Parse { line: 1, message: format!("{} type labels for {n} agents", types.len()) });
    }
    let (hno, head) = lines.next().ok_or_else(|| missing("column line"))?;
    let cols: Vec<&str> = head.split(',').collect();
    let with_v = match cols.len() {
        c if c == 5 + d => false,
        c if c == 5 + 2 * d => true,
        _ => return Err(Error::Parse { line: hno + 1, message: "column line does not match the dimension".into() }),
    };
    let total = l * jn * n * d;
    let mut positions = vec![T::zero(); total];
    let mut velocities = with_v.then(|| vec![T::zero(); total]);
    let mut times = vec![T::zero(); jn];
    let mut seen = vec![false; l * jn * n];
    for (no, line) in lines {
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::Parse { line: no, message: format!("expected {} fields, got {}", cols.len(), f.len()) });
        }
        let (li, j, i) = (parse_usize(f[0], no)?, parse_usize(f[1], no)?, parse_usize(f[3], no)?);
        if li >= l || j >= jn || i >= n {
            return Err(Error::Parse { line: no, message: "row index out of range".into() });
        }
        let slot = (li * jn + j) * n + i;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Parse { line: no, message: "duplicate row".into() });
        }
        times[j] = parse_num(f[2], no)?;
        for k in 0..d {
            positions[slot * d + k] = parse_num(f[5 + k], no)?;
        }
        if let Some(v) = velocities.as_mut() {
            for k in 0..d {
                v[slot * d + k] = parse_num(f[5 + d + k], no)?;
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse { line: 0, message: "dataset is missing rows".into() });
    }
    let traj = TrajectorySet {
        d,
        n,
        class,
        type_labels: if class.is_heterogeneous() { types } else { Vec::new() },
        times,
        positions,
        velocities,
        accelerations: None,
        boundary_margin: 0,
        noise_applied: false,
        seed: 0,
        stats: Vec::new(),
    };
    Ok((traj, meta))
}

pub fn write_basis<T: Real>(basis: &FeatureBasis<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#N={}", basis.len());
    let _ = writeln!(s, "#theta_variance={}", num(basis.theta_variance));
    let _ = writeln!(s, "#class={}", basis.class);
    let _ = writeln!(s, "#n_context={}", basis.n_context);
    let _ = writeln!(s, "#seed={}", basis.seed);
    let fourier = matches!(basis.family, Family::Fourier { .. });
    let _ = writeln!(s, "#family={}", if fourier { "fourier" } else { "radial" });
    if let Some(support) = &basis.support {
        let list: Vec<String> = support.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "#support={}", list.join(" "));
    }
    s.push_str("k,omega,coefficient,block_row,block_col");
    s.push_str(if fourier { ",phase\n" } else { "\n" });
    let zero = vec![T::zero(); basis.len()];
    let c = basis.coefficients.as_deref().unwrap_or(&zero);
    for k in 0..basis.len() {
        let (a, b) = block_of(basis, k);
        let _ = write!(s, "{k},{},{},{},{}", num(basis.omegas[k]), num(c[k]), a + 1, b + 1);
        if let Family::Fourier { phases } = &basis.family {
            let _ = write!(s, ",{}", num(phases[k]));
        }
        s.push('\n');
    }
    s
}

fn block_of<T: Real>(basis: &FeatureBasis<T>, k: usize) -> (usize, usize) {
    if let Some(g) = &basis.blocks {
        for (a, row) in g.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                if k >= blk.offset && k < blk.offset + blk.len {
                    return (a, b);
                }
            }
        }
    }
    (0, 0)
}

pub fn read_basis<T: Real>(text: &str) -> Result<FeatureBasis<T>> {
    let mut theta = T::one();
    let mut class = None;
    let mut n_context = None;
    let mut seed = 0u64;
    let mut fourier = false;
    let mut support: Option<Vec<usize>> = None;
    let mut omegas = Vec::new();
    let mut coefs = Vec::new();
    let mut phases = Vec::new();
    let mut blocks_seen: Vec<(usize, usize)> = Vec::new();
    let mut body = false;
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| Error::Parse { line: no, message: "malformed header".into() })?;
            match k {
                "theta_variance" => theta = parse_num(v, no)?,
                "class" => class = Some(SystemClass::from_str(v).map_err(|e| Error::Parse { line: no, message: e.to_string() })?),
                "n_context" => n_context = Some(parse_usize(v, no)?),
                "seed" => seed = v.trim().parse().map_err(|_| Error::Parse { line: no, message: "bad seed".into() })?,
                "family" => fourier = v.trim() == "fourier",
                "support" => support = Some(v.split_whitespace().map(|t| parse_usize(t, no)).collect::<Result<_>>()?),
                _ => {}
            }
            continue;
        }
        if !body {
            body = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let want = if fourier { 6 } else { 5 };
        if f.len() != want {
            return Err(Error::Parse { line: no, message: format!("expected {want} fields, got {}", f.len()) });
        }
        if parse_usize(f[0], no)? != omegas.len() {
            return Err(Error::Parse { line: no, message: "feature rows must be listed in order".into() });
        }
        omegas.push(parse_num::<T>(f[1], no)?);
        coefs.push(parse_num::<T>(f[2], no)?);
        let (a, b) = (parse_usize(f[3], no)?, parse_usize(f[4], no)?);
        if !(1..=2).contains(&a) || !(1..=2).contains(&b) {
            return Err(Error::Parse { line: no, message: "block indices must be 1 or 2".into() });
        }
        blocks_seen.push((a - 1, b - 1));
        if fourier {
            phases.push(parse_num::<T>(f[5], no)?);
        }
    }
    let class = class.ok_or(Error::Parse { line: 1, message: "missing header `#class=`".into() })?;
    let n_context = n_context.ok_or(Error::Parse { line: 1, message: "missing header `#n_context=`".into() })?;
    if omegas.is_empty() {
        return Err(Error::Parse { line: 1, message: "basis has no features".into() });
    }
    let blocks = if class.is_heterogeneous() {
        let mut g = [[Block::default(); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let ks: Vec<usize> = (0..blocks_seen.len()).filter(|&k| blocks_seen[k] == (a, b)).collect();
                if let (Some(&first), Some(&last)) = (ks.first(), ks.last()) {
                    if last + 1 - first != ks.len() {
                        return Err(Error::Parse { line: 1, message: "block columns must be contiguous".into() });
                    }
                    g[a][b] = Block { offset: first, len: ks.len() };
                } else {
                    let offset = (0..blocks_seen.len()).find(|&k| blocks_seen[k] > (a, b)).unwrap_or(blocks_seen.len());
                    g[a][b] = Block { offset, len: 0 };
                }
            }
        }
        Some(g)
    } else {
        None
    };
    let norms = if fourier {
        vec![T::one(); omegas.len()]
    } else {
        omegas
            .iter()
            .map(|&w| match class {
                SystemClass::FirstOrderHomogeneous => alpha_normalization(w, n_context),
                _ => Ok(beta_normalization(w)),
            })
            .collect::<Result<Vec<_>>>()?
    };
    let basis = FeatureBasis {
        class,
        omegas,
        norms,
        theta_variance: theta,
        n_context,
        seed,
        family: if fourier { Family::Fourier { phases } } else { Family::Radial },
        blocks,
        coefficients: None,
        support: None,
    };
    basis.with_coefficients(coefs, support)
}

/// Kernel curve `r,g_true,g_learned,rho_mass` on `grid`; `rho_mass` is the
/// mass of the density bin containing `r`.
pub fn write_kernel_curve<T: Real>(grid: &[T], g_true: &Kernel<T>, g_learned: &Kernel<T>, rho: &RadialDensity<T>) -> String {
    let mut s = String::from("r,g_true,g_learned,rho_mass\n");
    for &r in grid {
        let mass = rho.bin_of(r).map_or(T::zero(), |k| rho.mass[k]);
        let _ = writeln!(s, "{},{},{},{}", num(r), num(g_true.eval_guarded(r).0), num(g_learned.eval_guarded(r).0), num(mass));
    }
    s
}

/// `count` equidistant radii on `[lo, hi]`.
pub fn radius_grid<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    if count <= 1 {
        return vec![lo];
    }
    let h = (hi - lo) / T::from_count(count - 1);
    (0..count).map(|k| lo + h * T::from_count(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, IcKind, InitialConditionLaw};
    use crate::features::ThetaReading;
    use crate::integrate::IntegratorSettings;
    use crate::systems::{Kernel, SystemSpec};

    #[test]
    fn dataset_round_trip_is_exact() {
        let spec = SystemSpec::heterogeneous(2, vec![0, 0, 1], [[Kernel::constant(1.0), Kernel::constant(0.5)], [Kernel::zero(), Kernel::zero()]]).unwrap();
        let law = InitialConditionLaw::new(IcKind::GaussianStandard);
        let traj = generate_dataset(&spec, &law, 2, 4, 0.3, &IntegratorSettings::default(), 5).unwrap();
        let meta = DatasetMeta { transition_step: Some(2) };
        let text = write_dataset(&traj, &meta);
        let (back, m) = read_dataset::<f64>(&text).unwrap();
        assert_eq!(back.positions, traj.positions);
        assert_eq!(back.times, traj.times);
        assert_eq!(back.type_labels, traj.type_labels);
        assert_eq!(m, meta);
    }

    #[test]
    fn basis_round_trip() {
        let b = FeatureBasis::heterogeneous(3.0, ThetaReading::Variance, [[3, 2], [0, 1]], 5, 9).unwrap();
        let c: Vec<f64> = (0..6).map(|k| k as f64 - 2.5).collect();
        let b = b.with_coefficients(c, None).unwrap();
        let back = read_basis::<f64>(&write_basis(&b)).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let text = "#d=1\n#n=1\n#J=1\n#L=1\n#class=first-order-homogeneous\ntraj,step,time,agent,type,x_1\n0,0,0.0,0,1\n";
        match read_dataset::<f64>(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }
}
