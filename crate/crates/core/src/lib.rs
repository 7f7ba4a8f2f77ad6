//! Quaternionic twistor construction from c-projective data.
//!
//! The crate builds the twistor space of a quaternionic 4n-manifold from a
//! complex n-manifold carrying a c-projective class with type-(1,1)
//! curvature and a line bundle with connection, solves for real twistor
//! lines numerically, recovers the quaternionic structure on the parameter
//! space, and constructs the circle-invariant complex structures `J_D`
//! attached to admissible representatives `D` of the class.

pub mod cli;
pub mod cproj_geometry;
pub mod error;
pub mod tractor_transport;
pub mod twistor_lines;
pub mod twistor_space;
pub mod polynomial_algebra;
pub mod quaternionic_holonomy;

pub use error::{Error, Result};
