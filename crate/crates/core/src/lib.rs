//! Numerical machinery on the Heisenberg group: group arithmetic and Koranyi
//! geometry, Haar integration, left-invariant calculus, variable-exponent
//! norms, moment-vanishing atoms and generalized Riesz operators.

pub mod atoms;
pub mod calculus;
pub mod error;
pub mod field;
pub mod group;
pub mod integrate;
pub mod operators;
pub mod varexp;

pub use error::{Error, Result};
pub use field::{Bump, BumpSum, Dilated, Field, FnField, IndicatorSum, Region};
pub use group::{Dimension, GroupPoint, KoranyiBall, RotationMatrix};
pub use integrate::{Estimate, IntegrationMethod, IntegrationSpec};
