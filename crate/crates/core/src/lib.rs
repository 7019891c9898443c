//! Digit serial methods for division and square root, with exact bounds on
//! tails, proxies and digits.
//!
//! The engine and bound calculator are generic over [`numeric::Scalar`]
//! (exact rationals, `f64`, `f32`); the production-form algorithms, the
//! on-the-fly accumulator, verification and slack search work on exact
//! rationals only.

pub mod bounds;
pub mod divsqrt;
pub mod engine;
pub mod error;
pub mod numeric;
pub mod otf;
pub mod problem;
pub mod slack;
pub mod verify;

pub use error::{DsmError, Result};
pub use numeric::{Rational, Scalar};

pub type ExactPosynomial = bounds::Posynomial<Rational>;
pub type F64Posynomial = bounds::Posynomial<f64>;
pub type ExactPsiSpec = bounds::PsiSpec<Rational>;
pub type F64PsiSpec = bounds::PsiSpec<f64>;
pub type ExactBoundRow = bounds::BoundRow<Rational>;
pub type F64BoundRow = bounds::BoundRow<f64>;
pub type ExactSelection = engine::DigitSelection<Rational>;
pub type ExactConfig = engine::DsmConfig<Rational>;
pub type F64Config = engine::DsmConfig<f64>;
pub type ExactTrace = engine::DsmTrace<Rational>;
pub type F64Trace = engine::DsmTrace<f64>;
