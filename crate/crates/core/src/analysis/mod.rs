//! Is dispersal beneficial or detrimental to the total equilibrium population?

pub mod bounds;
pub mod conjecture;
pub mod crossings;
pub mod decomposition;
pub mod derivative;
pub mod sum_inequality;
pub mod two_block;
pub mod two_patch;
pub mod verdict;

pub use bounds::{
    check_balanced_dispersal, check_constant_equilibrium, check_equal_growth_bound, BoundCheck,
    ConstancyCheck,
};
pub use conjecture::{conjecture_probe, ConjectureReport, ProbeFamily, ProbeOptions};
pub use crossings::{find_crossings, BetaScan, Crossing, ScanOptions, ScanSummary};
pub use decomposition::sum_decomposition;
pub use derivative::{derivative_at_zero, derivative_at_zero_fd};
pub use two_block::{classify_two_block, two_block_reduce, TwoBlockPartition};
pub use two_patch::{classify_two_patch, Region, RegionVerdict};
pub use verdict::{compare_infinity_vs_zero, DispersalVerdict, Hypothesis, Relation};
