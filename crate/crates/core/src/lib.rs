//! Penalization schemes for multivalued backward stochastic equations driven
//! by a Brownian motion and a continuous increasing process, with numerical
//! certificates for the variational formulation.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the command-line front end uses.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` deliberately rejects NaN
#![allow(clippy::needless_range_loop)] // index loops mirror the recursions


pub mod convex;
pub mod error;
pub mod generator;
pub mod process;
pub mod scalar;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ConvexSpec = convex::ConvexSpec<f64>;
pub type CombinedPotential = convex::CombinedPotential<f64>;
pub type GeneratorSpec = generator::GeneratorSpec<f64>;
pub type MollifierConfig = generator::MollifierConfig<f64>;
pub type TimeGrid = process::TimeGrid<f64>;
pub type PathBundle = process::PathBundle<f64>;
pub type IncreasingProcessSpec = process::IncreasingProcessSpec<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type Scenario = solver::Scenario<f64>;
pub type SolutionField = solver::SolutionField<f64>;
pub type CeBackend = solver::CeBackend<f64>;
pub type TestProcess = verify::TestProcess<f64>;
pub type PathView = verify::PathView<f64>;
