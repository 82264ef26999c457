//! Multi-patch logistic dynamics with asymmetric migration.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mixing;
pub mod model;
pub mod ode;
pub mod random;
pub mod reference;
pub mod sis;

pub use analysis::{
    classify_two_block, classify_two_patch, compare_infinity_vs_zero, conjecture_probe,
    derivative_at_zero, find_crossings, two_block_reduce, BetaScan, DispersalVerdict, Region,
    RegionVerdict, TwoBlockPartition,
};
pub use dynamics::{
    equilibrium, Equilibrium, EquilibriumSolver, Method, SolverOptions, Trajectory,
};
pub use error::{Error, Result};
pub use graph::{
    Flux, FluxSpec, KernelSource, KernelVector, MigrationMatrix, MigrationSpec, SpectralReport,
    ThreePatchFluxes, ThreePatchGraph,
};
pub use mixing::{limit_equilibrium, MixingLimit, ReducedLogistic};
pub use model::{ModelSpec, PatchModel};
pub use sis::{logistic_to_sis, sis_limit_populations, EndemicState, SisLimit, SisModel, SisSpec};
