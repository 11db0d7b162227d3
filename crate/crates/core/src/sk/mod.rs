//! Spin-glass free energies over random media.

mod audit;
mod bounds;
mod energy;
mod media;

pub use audit::{audit_row, chi2_mean_abs_deviation, chi2_scaled_moment, condition_audit, AuditRow, ConditionAudit};
pub use bounds::{
    convergence_experiment, gamma_f_bound_check, generic_bound_check, hamiltonian_variance, ConvergenceRow,
    ConvergenceTable, Coupling, FreeEnergyFunctional, GammaBoundResult, GenericBoundResult, HamiltonianVariance, TestMap,
};
pub use energy::{
    free_energy_exact, free_energy_naive, gibbs_expectation, hamiltonian, FreeEnergyMethod, FreeEnergyResult,
    GibbsTable, MAX_EXACT_N, MAX_GIBBS_N, MAX_PAIR_GIBBS_N,
};
pub use media::{medium_sample, n_pairs, pair_index, pairs, Medium, MediumFamily, MediumSampler};
