use proptest::prelude::*;
use radial_kernels::datagen::{generate_dataset, IcKind, InitialConditionLaw};
use radial_kernels::integrate::IntegratorSettings;
use radial_kernels::io::{read_dataset, write_dataset, DatasetMeta};
use radial_kernels::solvers::top_s_support;
use radial_kernels::systems::rhs;
use radial_kernels::{AgentState, Kernel, KernelKind, SystemSpec64};

fn kernel(choice: u8) -> Kernel<f64> {
    match choice % 4 {
        0 => Kernel::lennard_jones(10.0, 1.0),
        1 => Kernel::new(KernelKind::CuckerSmale),
        2 => Kernel::new(KernelKind::SheepSheep),
        _ => Kernel::constant(-0.7),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_is_translation_invariant(
        choice in 0u8..4,
        x in prop::collection::vec(-3.0f64..3.0, 10),
        shift in prop::array::uniform2(-50.0f64..50.0),
    ) {
        let spec = SystemSpec64::first_order(2, 5, kernel(choice)).unwrap();
        let y: Vec<f64> = x.iter().enumerate().map(|(k, &e)| e + shift[k % 2]).collect();
        let a = rhs(&AgentState::new(x), &spec).unwrap().values;
        let b = rhs(&AgentState::new(y), &spec).unwrap().values;
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn homogeneous_velocities_sum_to_zero(choice in 0u8..4, x in prop::collection::vec(-3.0f64..3.0, 12)) {
        let spec = SystemSpec64::first_order(3, 4, kernel(choice)).unwrap();
        let out = rhs(&AgentState::new(x), &spec).unwrap().values;
        let scale = out.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            let s: f64 = (0..4).map(|i| out[i * 3 + k]).sum();
            prop_assert!(s.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn top_s_keeps_the_largest_magnitudes(u in prop::collection::vec(-10.0f64..10.0, 1..40), s in 1usize..40) {
        let s = s.min(u.len());
        let idx = top_s_support(&u, s);
        prop_assert_eq!(idx.len(), s);
        let smallest_kept = idx.iter().map(|&k| u[k].abs()).fold(f64::INFINITY, f64::min);
        for k in 0..u.len() {
            if !idx.contains(&k) {
                prop_assert!(u[k].abs() <= smallest_kept);
            }
        }
    }

    #[test]
    fn dataset_text_round_trips(seed in 0u64..1000, n in 1usize..5) {
        let spec = SystemSpec64::first_order(2, n, Kernel::new(KernelKind::CuckerSmale)).unwrap();
        let law = InitialConditionLaw::new(IcKind::GaussianStandard);
        let traj = generate_dataset(&spec, &law, 2, 3, 0.2, &IntegratorSettings::default(), seed).unwrap();
        let (back, _) = read_dataset::<f64>(&write_dataset(&traj, &DatasetMeta::default())).unwrap();
        prop_assert_eq!(back.positions, traj.positions);
    }
}
