use radial_kernels::systems::{rhs, rhs_first_order_heterog, rhs_first_order_homog, rhs_second_order_homog};
use radial_kernels::{AgentState, Kernel, KernelKind, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lj(r: f64) -> f64 {
    let (eps, sigma) = (10.0f64, 1.0f64);
    24.0 * eps * (sigma.powi(6) / r.powi(8) - 2.0 * sigma.powi(12) / r.powi(14))
}

fn cs(r: f64) -> f64 {
    (1.0 + r * r).powf(-0.25)
}

/// Straight double loop over ordered pairs, with per-pair weights.
fn brute_force(x: &[f64], diff: &[f64], d: usize, g: impl Fn(usize, usize, f64) -> f64, w: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = x.len() / d;
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        for p in 0..n {
            if p == i {
                continue;
            }
            let r = (0..d).map(|k| (x[p * d + k] - x[i * d + k]).powi(2)).sum::<f64>().sqrt();
            for k in 0..d {
                out[i * d + k] += w(p) * g(i, p, r) * (diff[p * d + k] - diff[i * d + k]);
            }
        }
    }
    out
}

fn random_positions(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

fn assert_close(a: &[f64], b: &[f64], rel: f64) {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= rel * scale, "{x} vs {y}");
    }
}

#[test]
fn lennard_jones_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = 3;
        let x = random_positions(&mut rng, n * 2, 1.5);
        let spec = SystemSpec::first_order(2, n, Kernel::lennard_jones(10.0, 1.0)).unwrap();
        let got = rhs_first_order_homog(&AgentState::new(x.clone()), &spec).unwrap();
        let want = brute_force(&x, &x, 2, |_, _, r| lj(r), |_| 1.0 / n as f64);
        assert_close(&got.values, &want, 1e-12);
    }
}

#[test]
fn cucker_smale_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [2, 4, 10] {
        let x = random_positions(&mut rng, n * 2, 5.0);
        let v = random_positions(&mut rng, n * 2, 2.0);
        let spec = SystemSpec::second_order(2, n, Kernel::new(KernelKind::CuckerSmale)).unwrap();
        let got = rhs_second_order_homog(&AgentState::with_velocities(x.clone(), v.clone()), &spec).unwrap();
        let want = brute_force(&x, &v, 2, |_, _, r| cs(r), |_| 1.0 / n as f64);
        assert_close(&got.values, &want, 1e-12);
    }
}

#[test]
fn predator_prey_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let labels = SystemSpec::<f64>::two_type_labels(9, 1);
    let grid = [
        [Kernel::new(KernelKind::PreyPrey), Kernel::new(KernelKind::PreyPredator)],
        [Kernel::new(KernelKind::PredatorPrey), Kernel::new(KernelKind::PredatorPredator)],
    ];
    let spec = SystemSpec::heterogeneous(2, labels.clone(), grid).unwrap();
    let g = |a: usize, b: usize, r: f64| match (a, b) {
        (0, 0) => 1.0 - r.powi(-2),
        (0, 1) => -2.0 * r.powi(-2),
        (1, 0) => 3.5 * r.powi(-3),
        _ => 0.0,
    };
    let counts = [9.0, 1.0];
    let x = random_positions(&mut rng, 20, 2.0);
    let got = rhs_first_order_heterog(&AgentState::new(x.clone()), &spec).unwrap();
    let want = brute_force(&x, &x, 2, |i, p, r| g(labels[i], labels[p], r), |p| 1.0 / counts[labels[p]]);
    assert_close(&got.values, &want, 1e-12);
}

#[test]
fn translation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = random_positions(&mut rng, 12, 2.0);
    let v = random_positions(&mut rng, 12, 1.0);
    let shift = [3.25, -7.5];
    let y: Vec<f64> = x.iter().enumerate().map(|(k, &e)| e + shift[k % 2]).collect();
    let specs = [
        SystemSpec::first_order(2, 6, Kernel::lennard_jones(10.0, 1.0)).unwrap(),
        SystemSpec::second_order(2, 6, Kernel::new(KernelKind::CuckerSmale)).unwrap(),
        SystemSpec::heterogeneous(
            2,
            SystemSpec::<f64>::two_type_labels(4, 2),
            [
                [Kernel::new(KernelKind::SheepSheep), Kernel::new(KernelKind::SheepFoodAttraction)],
                [Kernel::zero(), Kernel::zero()],
            ],
        )
        .unwrap(),
    ];
    for spec in &specs {
        let state = |p: &[f64]| {
            if spec.class.is_second_order() {
                AgentState::with_velocities(p.to_vec(), v.clone())
            } else {
                AgentState::new(p.to_vec())
            }
        };
        let a = rhs(&state(&x), spec).unwrap().values;
        let b = rhs(&state(&y), spec).unwrap().values;
        assert_close(&a, &b, 1e-12);
    }
}

#[test]
fn homogeneous_momentum_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for kernel in [Kernel::lennard_jones(10.0, 1.0), Kernel::new(KernelKind::CuckerSmale), Kernel::constant(2.0)] {
        let x = random_positions(&mut rng, 21, 2.0);
        let spec = SystemSpec::first_order(3, 7, kernel).unwrap();
        let out = rhs(&AgentState::new(x), &spec).unwrap().values;
        let scale = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            let total: f64 = (0..7).map(|i| out[i * 3 + k]).sum();
            assert!(total.abs() <= 1e-13 * scale.max(1.0), "{total}");
        }
    }
}

#[test]
fn heterogeneous_reduces_to_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let x = random_positions(&mut rng, 10, 3.0);
    let cs = || Kernel::new(KernelKind::CuckerSmale);
    let het = SystemSpec::heterogeneous(2, vec![0; 5], [[cs(), cs()], [cs(), cs()]]).unwrap();
    let hom = SystemSpec::first_order(2, 5, cs()).unwrap();
    let a = rhs(&AgentState::new(x.clone()), &het).unwrap().values;
    let b = rhs(&AgentState::new(x), &hom).unwrap().values;
    assert_close(&a, &b, 1e-14);
}

#[test]
fn identical_velocities_do_not_accelerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_positions(&mut rng, 8, 3.0);
    let spec = SystemSpec::second_order(2, 4, Kernel::new(KernelKind::CuckerSmale)).unwrap();
    let out = rhs_second_order_homog(&AgentState::with_velocities(x, [0.3, -1.1].repeat(4)), &spec).unwrap();
    assert!(out.values.iter().all(|&v| v == 0.0));
}

#[test]
fn coincident_agents_are_clamped_not_infinite() {
    let spec = SystemSpec::first_order(2, 2, Kernel::lennard_jones(10.0, 1.0)).unwrap();
    let out = rhs(&AgentState::new(vec![1.0, 1.0, 1.0, 1.0]), &spec).unwrap();
    assert!(out.values.iter().all(|v: &f64| v.is_finite()));
    assert_eq!(out.clamped_pairs, 1);
}
