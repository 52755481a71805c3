//! Primal recovery, optimality checks and dense oracles.

mod dense_oracle;
mod recover;
mod spectra;

pub use dense_oracle::{dense_kkt, dense_reference_solve, DenseKkt};
pub use recover::{
    forward_simulate, kkt_residual, recover_solution, trajectory_gap, KktResiduals, TrajectorySolution,
};
pub use spectra::{
    condition_numbers, densify_operator, nabla_dense, spd_inverse_dense, spectral_radius, spectral_radius_dense,
    spectral_radius_power, splitting_radii, splitting_radius, symmetric_eigenvalues, upsilon_dense,
    ConditioningReport, SplittingRadii,
};
