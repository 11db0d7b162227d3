//! Monte Carlo tools for the carré du champ operator on Wiener space and the
//! comparison inequalities built on it.

pub mod comparison;
pub mod error;
pub mod fbm;
pub mod gamma;
pub mod linalg;
pub mod parallel;
pub mod quadrature;
pub mod sk;
pub mod stats;
pub mod wiener;

pub use error::{Error, Result};
pub use stats::{Estimate, RunningStats};
