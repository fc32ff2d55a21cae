//! Optimization landscape of dynamic output-feedback LQR (dLQR).
//!
//! The crate evaluates the exact infinite-horizon cost of a full-order
//! dynamic controller, its policy gradient, the effect of similarity
//! transformations of the controller state (including the cost-optimal
//! transformation), and the closed-form observable stationary controller
//! built from the two Riccati equations.

pub mod cost;
pub mod descent;
pub mod error;
pub mod gradient;
pub mod matops;
pub mod model;
pub mod problem;
pub mod sampling;
pub mod similarity;
pub mod stationary;

pub use error::{Error, Result};
pub use matops::{Matrix, SolverConfig};
pub use model::{Controller, Plant, SecondMoment};
pub use problem::Problem;
