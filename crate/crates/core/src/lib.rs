//! Numerical laboratory for Fibonacci unimodal maps.
//!
//! The crate constructs the generalized renormalization hierarchy of a
//! Fibonacci map, verifies its quantitative geometry (scaling factors,
//! return times, multipliers), iterates the Thurston pull-back on marked
//! triples, and builds the complex puzzle pieces whose rescalings converge
//! to the Julia set of z² - 1.

pub mod complexext;
pub mod conjugacy;
pub mod error;
pub mod numerics;
pub mod renorm;
pub mod thurston;
pub mod unimodal;

pub use error::{Error, Result};
pub use numerics::{hausdorff_distance, Polyline, PrecisionContext, RealInterval};
pub use renorm::{Hierarchy, RenormLevel};
pub use thurston::MarkedTriple;
pub use unimodal::{Family, UnimodalMap};
