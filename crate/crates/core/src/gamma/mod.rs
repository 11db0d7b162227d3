//! The Γ operator: Mehler-representation estimator, exact chaos oracle and
//! the moment identities built on it.

pub mod chaos;
pub mod checks;
pub mod mehler;

pub use chaos::{gamma_oracle, ChaosForm, ChaosTerm};
pub use checks::{ibp_residual, poincare_check, poincare_profile, IbpResult, PoincareResult, ScalarMap};
pub use mehler::{
    capital_delta, delta_from_gamma, gamma_matrix, gamma_pointwise, inner_units, mehler_shift, GammaEstimate,
    GammaMatrix, KernelScratch, MehlerConfig, MehlerKernel,
};
