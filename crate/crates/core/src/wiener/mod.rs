//! Finite-dimensional Wiener space, sample points, the expression language
//! and exact (forward-mode) Malliavin derivatives.

pub mod expr;
pub mod functional;
pub mod hermite;
pub mod parse;
pub mod space;

pub use expr::{constant, w, Expression, Tape};
pub use functional::{Difference, Differentiable, Functional, RandomField, Workspace};
pub use hermite::{hermite, hermite_pair};
pub use parse::parse_expression;
pub use space::{build_space, SamplePoint, WienerSpace};
