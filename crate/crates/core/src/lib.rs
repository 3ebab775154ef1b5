//! Learning pairwise interaction kernels of multi-agent systems from noisy
//! trajectories with (sparse) random radial feature regression.
//!
//! The numerical core is generic over the scalar type through [`Real`]
//! (`f32` and `f64`); the aliases at the crate root fix `f64`, which the
//! command-line front end uses throughout.
//!
//! ```
//! use radial_kernels::{Kernel64, SystemSpec64, AgentState};
//!
//! let spec = SystemSpec64::first_order(1, 2, Kernel64::constant(1.0)).unwrap();
//! let out = radial_kernels::systems::rhs(&AgentState::new(vec![0.0, 1.0]), &spec).unwrap();
//! assert_eq!(out.values, vec![0.5, -0.5]);
//! ```

pub mod datagen;
pub mod error;
pub mod features;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod seeds;
pub mod solvers;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Real;
pub use systems::{AgentState, Kernel, KernelKind, SystemClass, SystemSpec};

pub type Kernel64 = systems::Kernel<f64>;
pub type SystemSpec64 = systems::SystemSpec<f64>;
pub type AgentState64 = systems::AgentState<f64>;
pub type TrajectorySet64 = datagen::TrajectorySet<f64>;
pub type InitialConditionLaw64 = datagen::InitialConditionLaw<f64>;
pub type RadialDensity64 = datagen::RadialDensity<f64>;
pub type FeatureBasis64 = features::FeatureBasis<f64>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type IntegratorSettings64 = integrate::IntegratorSettings<f64>;
pub type ReducedSystem64 = linalg::ReducedSystem<f64>;
pub type SolveReport64 = solvers::SolveReport<f64>;
