//! Sampled-data control barrier function safety filters whose margins are
//! rigorous lower bounds, computed with outward-rounded interval arithmetic.
//!
//! Every numeric type is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`, which the scenarios use.

pub mod controller;
pub mod error;
pub mod interval;
pub mod margin;
pub mod poly;
pub mod reach;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Interval64 = interval::Interval<f64>;
pub type IntervalVector64 = interval::IntervalVector<f64>;
pub type IntervalMatrix64 = interval::IntervalMatrix<f64>;
pub type Poly64 = poly::MultiPoly<f64>;
pub type IntervalPoly64 = poly::IntervalPoly<f64>;
pub type TaylorModel64 = poly::TaylorModel<f64>;
pub type Zonotope64 = reach::Zonotope<f64>;
pub type PolyField64 = reach::PolyField<f64>;
pub type CbfSpec64 = controller::CbfSpec<f64>;
pub type ControlAffineSystem64 = controller::ControlAffineSystem<f64>;
pub type Barrier64 = controller::Barrier<f64>;
pub type Scenario64 = scenario::Scenario<f64>;
pub type Interval32 = interval::Interval<f32>;
pub type IntervalVector32 = interval::IntervalVector<f32>;
