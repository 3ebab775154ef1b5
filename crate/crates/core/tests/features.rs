use std::f64::consts::PI;

use radial_kernels::datagen::{
    estimate_accelerations, estimate_velocities_central_difference, generate_dataset, IcKind, InitialConditionLaw,
    TrajectorySet,
};
use radial_kernels::features::{
    assemble_system, build_learned_system, eval_learned_kernel, FeatureBasis, Family, RowOptions, Tabulation,
    ThetaReading,
};
use radial_kernels::integrate::{integrate, IntegratorSettings};
use radial_kernels::solvers::solve_least_squares_dense;
use radial_kernels::{AgentState, Kernel, KernelKind, SystemClass, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_rows() -> RowOptions {
    RowOptions { include_boundary: true, ..Default::default() }
}

fn static_pair() -> TrajectorySet<f64> {
    TrajectorySet {
        d: 1,
        n: 2,
        class: SystemClass::FirstOrderHomogeneous,
        type_labels: vec![],
        times: vec![0.0, 0.5, 1.0],
        positions: [0.0, 1.0].repeat(3),
        velocities: Some(vec![0.0; 6]),
        accelerations: None,
        boundary_margin: 1,
        noise_applied: false,
        seed: 0,
        stats: vec![],
    }
}

fn single_feature(omega: f64) -> FeatureBasis<f64> {
    let mut b = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 1, 2, 0).unwrap();
    b.omegas = vec![omega];
    b.norms = vec![2f64.powi(2) * omega.powi(3) / PI.sqrt()];
    b
}

#[test]
fn single_feature_row_by_hand() {
    let (a, _) = assemble_system(&static_pair(), &single_feature(1.0), &all_rows()).unwrap();
    assert_eq!((a.rows, a.cols), (6, 1));
    let want = (4.0 / PI.sqrt()) / 2.0 * (-1f64).exp();
    assert!((a.get(0, 0) - want).abs() < 1e-15);
    assert!((want - 0.415107).abs() < 1e-6);
    assert!((a.get(1, 0) + want).abs() < 1e-15);
}

#[test]
fn fourier_feature_with_zero_frequency_is_mean_displacement() {
    let mut b = FeatureBasis::fourier(1.0, ThetaReading::Variance, 1, 2, 0).unwrap();
    b.omegas = vec![0.0];
    b.family = Family::Fourier { phases: vec![0.0] };
    let (a, _) = assemble_system(&static_pair(), &b, &all_rows()).unwrap();
    assert_eq!(a.get(0, 0), 0.5);
    assert_eq!(a.get(1, 0), -0.5);
}

#[test]
fn shape_follows_interior_timestamps() {
    let spec = SystemSpec::first_order(2, 7, Kernel::lennard_jones(10.0, 1.0)).unwrap();
    let law = InitialConditionLaw::new(IcKind::GaussianStandard);
    let settings = IntegratorSettings::default().with_max_step(1e-3);
    let traj = generate_dataset(&spec, &law, 3, 10, 0.01, &settings, 1).unwrap();
    let traj = estimate_velocities_central_difference(&traj).unwrap();
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 35.0, ThetaReading::Variance, 40, 7, 2).unwrap();
    let (a, v) = assemble_system(&traj, &basis, &RowOptions::default()).unwrap();
    assert_eq!(a.rows, 2 * 7 * 8 * 3);
    assert_eq!(a.cols, 40);
    assert_eq!(v.len(), a.rows);
}

fn random_state(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// One-frame dataset with the given positions (and velocities for the second-order case).
fn one_frame(spec: &SystemSpec<f64>, x: Vec<f64>, v: Vec<f64>) -> TrajectorySet<f64> {
    let nd = spec.n * spec.d;
    let second = spec.class.is_second_order();
    TrajectorySet {
        d: spec.d,
        n: spec.n,
        class: spec.class,
        type_labels: spec.type_labels.clone(),
        times: vec![0.0],
        positions: x,
        velocities: Some(if second { v } else { vec![0.0; nd] }),
        accelerations: second.then(|| vec![0.0; nd]),
        boundary_margin: 0,
        noise_applied: false,
        seed: 0,
        stats: vec![],
    }
}

/// `(1/n_b) Σ g_N^{ab}(|r|) Δ` evaluated from closed-form learned kernels.
fn direct_model(basis: &FeatureBasis<f64>, spec: &SystemSpec<f64>, x: &[f64], v: &[f64]) -> Vec<f64> {
    let (n, d) = (spec.n, spec.d);
    let c = basis.coefficients.as_ref().unwrap();
    let counts = spec.type_counts();
    let het = spec.class.is_heterogeneous();
    let g = |a: usize, b: usize, r: f64| -> f64 {
        let blk = basis.block(a, b);
        (blk.offset..blk.offset + blk.len)
            .map(|k| {
                let w = basis.omegas[k];
                let norm = match spec.class {
                    SystemClass::FirstOrderHomogeneous => 2f64.powi(n as i32) * w.powi(n as i32 + 1) / PI.powf((n as f64 - 1.0) / 2.0),
                    _ => PI.sqrt() / (2.0 * w),
                };
                c[k] * norm * (-r * r * w * w).exp()
            })
            .sum()
    };
    let diffs = if spec.class.is_second_order() { v } else { x };
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        for p in 0..n {
            if p == i {
                continue;
            }
            let (a, b) = if het { (spec.type_labels[i], spec.type_labels[p]) } else { (0, 0) };
            let weight = if het { 1.0 / counts[b] as f64 } else { 1.0 / n as f64 };
            let r = (0..d).map(|k| (x[p * d + k] - x[i * d + k]).powi(2)).sum::<f64>().sqrt();
            let gr = g(a, b, r);
            for k in 0..d {
                out[i * d + k] += weight * gr * (diffs[p * d + k] - diffs[i * d + k]);
            }
        }
    }
    out
}

fn bases() -> Vec<(SystemSpec<f64>, FeatureBasis<f64>)> {
    let cs = || Kernel::new(KernelKind::CuckerSmale);
    vec![
        (
            SystemSpec::first_order(2, 4, cs()).unwrap(),
            FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 3.0, ThetaReading::Variance, 25, 4, 3).unwrap(),
        ),
        (
            SystemSpec::second_order(3, 5, cs()).unwrap(),
            FeatureBasis::homogeneous(SystemClass::SecondOrderHomogeneous, 2.0, ThetaReading::Variance, 25, 5, 4).unwrap(),
        ),
        (
            SystemSpec::heterogeneous(2, SystemSpec::<f64>::two_type_labels(3, 2), [[cs(), cs()], [cs(), cs()]]).unwrap(),
            FeatureBasis::heterogeneous(4.0, ThetaReading::Variance, [[6, 5], [4, 3]], 5, 5).unwrap(),
        ),
    ]
}

#[test]
fn model_prediction_matches_learned_kernel_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (spec, basis) in bases() {
        for _ in 0..5 {
            let c: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let basis = basis.clone().with_coefficients(c.clone(), None).unwrap();
            let x = random_state(&mut rng, spec.n * spec.d);
            let v = random_state(&mut rng, spec.n * spec.d);
            let (a, _) = assemble_system(&one_frame(&spec, x.clone(), v.clone()), &basis, &all_rows()).unwrap();
            let got = a.apply(&c);
            let want = direct_model(&basis, &spec, &x, &v);
            let scale = want.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * scale, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn learned_system_rhs_equals_model_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (spec, basis) in bases() {
        let c: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let basis = basis.with_coefficients(c.clone(), None).unwrap();
        let learned = build_learned_system(&basis, &spec, None).unwrap();
        let x = random_state(&mut rng, spec.n * spec.d);
        let v = random_state(&mut rng, spec.n * spec.d);
        let (a, _) = assemble_system(&one_frame(&spec, x.clone(), v.clone()), &basis, &all_rows()).unwrap();
        let state = if spec.class.is_second_order() { AgentState::with_velocities(x, v) } else { AgentState::new(x) };
        let mut out = radial_kernels::systems::rhs(&state, &learned).unwrap().values;
        if spec.class.is_second_order() {
            out.drain(..spec.n * spec.d);
        }
        let pred = a.apply(&c);
        for (g, w) in out.iter().zip(&pred) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }
}

#[test]
fn column_scaling_leaves_the_fit_unchanged() {
    let spec: SystemSpec<f64> = SystemSpec::first_order(2, 5, Kernel::new(KernelKind::CuckerSmale)).unwrap();
    let law = InitialConditionLaw::new(IcKind::GaussianStandard);
    let traj = generate_dataset(&spec, &law, 4, 12, 0.5, &IntegratorSettings::default(), 7).unwrap();
    let traj = estimate_velocities_central_difference(&traj).unwrap();
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 6, 5, 8).unwrap();
    let kappa = 7.5;
    let mut scaled = basis.clone();
    scaled.norms.iter_mut().for_each(|w| *w *= kappa);
    let (a, v) = assemble_system(&traj, &basis, &RowOptions::default()).unwrap();
    let (b, _) = assemble_system(&traj, &scaled, &RowOptions::default()).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((y - kappa * x).abs() <= 1e-13 * y.abs().max(1e-300));
    }
    let ca = solve_least_squares_dense(&a.values, &v, a.cols).unwrap().coefficients;
    let cb = solve_least_squares_dense(&b.values, &v, b.cols).unwrap().coefficients;
    let ga = basis.with_coefficients(ca.clone(), None).unwrap();
    let gb = scaled.with_coefficients(cb.clone(), None).unwrap();
    for (x, y) in ca.iter().zip(&cb) {
        assert!((x - kappa * y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
    }
    for r in [0.0, 0.3, 1.0, 2.5] {
        let (p, q) = (eval_learned_kernel(&ga, r).unwrap(), eval_learned_kernel(&gb, r).unwrap());
        assert!((p - q).abs() <= 1e-6 * p.abs().max(1.0), "{p} vs {q}");
    }
}

#[test]
fn nonnegative_coefficients_give_nonnegative_kernels() {
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 10.0, ThetaReading::Variance, 30, 3, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let c: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
    let basis = basis.with_coefficients(c, None).unwrap();
    for k in 0..200 {
        assert!(eval_learned_kernel(&basis, k as f64 * 0.02).unwrap() >= 0.0);
    }
}

#[test]
fn sparse_evaluation_matches_dense_evaluation() {
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 5.0, ThetaReading::Variance, 20, 3, 10).unwrap();
    let support = vec![1, 4, 9, 17];
    let mut c = vec![0.0; 20];
    for (j, &k) in support.iter().enumerate() {
        c[k] = j as f64 - 1.3;
    }
    let sparse = basis.clone().with_coefficients(c.clone(), Some(support)).unwrap();
    let dense = basis.with_coefficients(c, None).unwrap();
    for r in [0.0, 0.1, 0.7, 1.9] {
        let (a, b) = (eval_learned_kernel(&sparse, r).unwrap(), eval_learned_kernel(&dense, r).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn zero_coefficients_forecast_is_static() {
    let spec = SystemSpec::first_order(2, 4, Kernel::new(KernelKind::CuckerSmale)).unwrap();
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 5, 4, 1).unwrap();
    let basis = basis.with_coefficients(vec![0.0; 5], None).unwrap();
    let learned = build_learned_system(&basis, &spec, None).unwrap();
    let y0 = vec![0.1, 0.2, -0.4, 1.0, 2.0, 0.5, -1.0, 0.0];
    let sol = integrate(&learned, 0.0, &y0, &[0.5, 1.0], &IntegratorSettings::default()).unwrap();
    assert_eq!(sol.state(1), &y0[..]);
}

#[test]
fn tabulated_forecast_tracks_exact_forecast() {
    let spec = SystemSpec::first_order(2, 4, Kernel::new(KernelKind::CuckerSmale)).unwrap();
    let basis = FeatureBasis::homogeneous(SystemClass::FirstOrderHomogeneous, 1.0, ThetaReading::Variance, 8, 4, 2).unwrap();
    let c: Vec<f64> = (0..8).map(|k| 0.1 * k as f64 - 0.3).collect();
    let basis = basis.with_coefficients(c, None).unwrap();
    let exact = build_learned_system(&basis, &spec, None).unwrap();
    let table = build_learned_system(&basis, &spec, Some(Tabulation { r_max: 10.0, nodes: 4001 })).unwrap();
    let y0 = vec![0.1, 0.2, -0.4, 1.0, 2.0, 0.5, -1.0, 0.0];
    let s = IntegratorSettings::default().with_tolerances(1e-10, 1e-12);
    let a = integrate(&exact, 0.0, &y0, &[2.0], &s).unwrap();
    let b = integrate(&table, 0.0, &y0, &[2.0], &s).unwrap();
    for (x, y) in a.state(0).iter().zip(b.state(0)) {
        assert!((x - y).abs() < 1e-7);
    }
}

#[test]
fn second_order_features_need_accelerations() {
    let spec = SystemSpec::second_order(2, 3, Kernel::new(KernelKind::CuckerSmale)).unwrap();
    let law = InitialConditionLaw::new(IcKind::GaussianStandard).with_velocities(IcKind::GaussianStandard);
    let traj = generate_dataset(&spec, &law, 2, 8, 0.5, &IntegratorSettings::default(), 3).unwrap();
    let basis = FeatureBasis::homogeneous(SystemClass::SecondOrderHomogeneous, 1.0, ThetaReading::Variance, 5, 3, 1).unwrap();
    assert!(assemble_system(&traj, &basis, &RowOptions::default()).is_err());
    let traj = estimate_accelerations(&traj).unwrap();
    let (a, _) = assemble_system(&traj, &basis, &RowOptions::default()).unwrap();
    assert_eq!(a.rows, 2 * 3 * 4 * 2);
}
