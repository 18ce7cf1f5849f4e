//! Generalized Nash equilibrium problems with shared polytope constraints:
//! game models, Nikaido-Isoda gap machinery, equilibrium solvers, and
//! sampling-based structure checkers.
//!
//! Everything is generic over the scalar type; the `*64` aliases pin `f64`
//! for the common case.

pub mod block;
pub mod checkers;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod ni;
pub mod scalar;
pub mod scenarios;
pub mod sections;

pub use block::BlockVector;
pub use error::{GameError, Result};
pub use scalar::Scalar;

pub type BlockVector64 = block::BlockVector<f64>;
pub type GameSpec64 = model::GameSpec<f64>;
pub type ObjectiveSpec64 = model::ObjectiveSpec<f64>;
pub type BoxBounds64 = model::BoxBounds<f64>;
pub type SharedSet64 = model::SharedSet<f64>;
pub type ConstraintSpec64 = model::ConstraintSpec<f64>;
pub type WeightVector64 = model::WeightVector<f64>;
pub type FeasibleSection64 = sections::FeasibleSection<f64>;
pub type GapReport64 = ni::GapReport<f64>;
pub type SolveReport64 = equilibrium::SolveReport<f64>;
pub type PotentialSpec64 = equilibrium::PotentialSpec<f64>;
pub type BiasSweepEntry64 = equilibrium::BiasSweepEntry<f64>;
pub type HeatMarketConfig64 = scenarios::HeatMarketConfig<f64>;
pub type IntervalMap64 = checkers::IntervalMap<f64>;
pub type SetValuedOracle64 = checkers::SetValuedOracle<f64>;
