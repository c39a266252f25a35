//! Discrete Riesz and logarithmic energies of point configurations on the
//! flat torus `[0, 1)^2`, gradient descent to critical points, and a census
//! of the critical points reached, modulo torus isometries and relabeling.

pub mod analysis;
pub mod census;
pub mod energy;
pub mod error;
pub mod factory;
pub mod flow;
pub mod isometry;
pub mod torus;
pub mod verify;

pub use energy::{EnergySpec, GradientField};
pub use error::{Error, Result};
pub use torus::{Configuration, TorusPoint};
