//! Interpolation-based comparison of suprema and smooth functionals of
//! fields on Wiener space, with the elementary independence baselines.

pub mod concentration;
pub mod perturbation;
pub mod slepian;
pub mod softmax;
pub mod sudakov;

pub use crate::linalg::operator_norm;
pub use concentration::{audit_psd, concentration_check, ConcentrationResult, PsdAudit};
pub use perturbation::{
    perturbation_experiment, perturbation_gamma, PerturbationGamma, PerturbationModel, PerturbationReport,
    PerturbedComponent,
};
pub use slepian::{
    expectation_pair, slepian_experiment, slepian_phi_prime, slepian_phi_prime_profile, ExpectationPair,
    HessianFunction, SlepianPoint, SlepianReport,
};
pub use softmax::{h_weights, sandwich_gap, softmax_sup};
pub use sudakov::{
    check_disjoint, default_betas, default_t_grid, expected_max_pair, phi_increment, phi_value, sf_phi_prime,
    sf_phi_prime_profile, sudakov_fernique_experiment, BetaProfile, MaxComparison, PhiPrimePoint, SoftmaxPath,
    SudakovReport,
};
