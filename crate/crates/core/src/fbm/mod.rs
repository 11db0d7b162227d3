//! SDEs driven by fractional Brownian motion with Hurst index above 1/2.

pub mod grid;
pub mod sde;
pub mod sup;

pub use grid::{fbm_cov, fbm_sample, FbmGrid, FbmPath};
pub use sde::{delta_fbm, euler_solve, sde_malliavin, DriftSpec, Monotone, SdeIncrement, SdePath};
pub use sup::{expected_fbm_max, pilot_mean, sup_comparison, SupComparison};
