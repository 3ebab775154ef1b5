//! Built-in experiment tables.

pub const NAMES: &[&str] = &["lennard-jones", "cucker-smale", "predator-prey", "sheep-food"];

const LENNARD_JONES: &[(&str, &str)] = &[
    ("system.class", "first-order-homogeneous"),
    ("system.d", "2"),
    ("system.n", "7"),
    ("system.kernel", "lennard-jones:10:1"),
    ("initial.positions", "gaussian"),
    ("data.L", "100"),
    ("data.L_prime", "2000"),
    ("data.J", "150"),
    ("data.T", "0.01"),
    ("data.T_tilde", "0.5"),
    ("data.noise", "0.001"),
    ("features.N", "1000"),
    ("features.theta", "35"),
    ("solver.sparsity", "150"),
    ("integrator.max_step", "1e-4"),
    ("sweep.s_list", "10,40,80,150"),
];

const CUCKER_SMALE: &[(&str, &str)] = &[
    ("system.class", "second-order-homogeneous"),
    ("system.d", "2"),
    ("system.n", "10"),
    ("system.kernel", "cucker-smale"),
    ("initial.positions", "box:0:100"),
    ("initial.velocities", "box:0:100"),
    ("data.L", "50"),
    ("data.L_prime", "2000"),
    ("data.J", "200"),
    ("data.T", "0.25"),
    ("data.T_tilde", "0.5"),
    ("data.noise", "0.01"),
    ("features.N", "1000"),
    ("features.theta", "1"),
    ("solver.sparsity", "500"),
    ("sweep.s_list", "50,100,250,500"),
];

const PREDATOR_PREY: &[(&str, &str)] = &[
    ("system.class", "first-order-heterogeneous"),
    ("system.d", "2"),
    ("system.n1", "9"),
    ("system.n2", "1"),
    ("system.kernel_11", "prey-prey"),
    ("system.kernel_12", "prey-predator"),
    ("system.kernel_21", "predator-prey"),
    ("system.kernel_22", "predator-predator"),
    ("initial.positions_1", "ring:0.5:1.5"),
    ("initial.positions_2", "disk:0.1"),
    ("data.L", "50"),
    ("data.L_prime", "2000"),
    ("data.J", "200"),
    ("data.T", "5"),
    ("data.T_tilde", "10"),
    ("data.noise", "0.001"),
    ("features.N_11", "500"),
    ("features.N_12", "500"),
    ("features.N_21", "500"),
    ("features.N_22", "50"),
    ("features.theta", "30"),
    ("solver.sparsity", "400"),
    ("sweep.s_list", "50,100,200,400"),
];

const SHEEP_FOOD: &[(&str, &str)] = &[
    ("system.class", "first-order-heterogeneous"),
    ("system.d", "2"),
    ("system.n1", "20"),
    ("system.n2", "40"),
    ("system.kernel_11", "sheep-sheep"),
    ("system.kernel_12", "sheep-food"),
    ("system.kernel_21", "zero"),
    ("system.kernel_22", "zero"),
    ("initial.positions_1", "strip:-5:5:-10:-9"),
    ("initial.positions_2", "heart:5"),
    ("data.L", "50"),
    ("data.L_prime", "1000"),
    ("data.J", "600"),
    ("data.T", "100"),
    ("data.T_tilde", "400"),
    ("data.noise", "0.001"),
    ("features.N_11", "500"),
    ("features.N_12", "500"),
    ("features.N_21", "50"),
    ("features.N_22", "50"),
    ("features.theta", "10"),
    ("solver.sparsity", "600"),
    ("sweep.s_list", "100,200,400,600"),
];

/// Key/value table of a preset.
pub fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    match name {
        "lennard-jones" => Some(LENNARD_JONES),
        "cucker-smale" => Some(CUCKER_SMALE),
        "predator-prey" => Some(PREDATOR_PREY),
        "sheep-food" => Some(SHEEP_FOOD),
        _ => None,
    }
}
