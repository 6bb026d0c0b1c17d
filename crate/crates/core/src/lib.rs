//! Complexity certificates for first-order convex descent methods.
//!
//! The pipeline is: an error bound (`error_bounds`) becomes a desingularizing
//! function (`desingularization`); a descent method (`descent`) produces
//! iterates satisfying (H1)/(H2); the one-dimensional worst-case sequence
//! (`majorant`) bounds their values; `verification` checks all of it.
//!
//! Everything is generic over [`Real`]; the aliases below fix `f64`.

pub mod convex;
pub mod descent;
pub mod desingularization;
pub mod error;
pub mod error_bounds;
pub mod extended;
pub mod linalg;
pub mod majorant;
pub mod reference;
pub mod sampling;
pub mod scalar;
pub mod sets;
pub mod verification;

pub use error::{Error, Result};
pub use extended::Extended;
pub use scalar::Real;

pub type Point = convex::Point<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type ConvexObjective = convex::ConvexObjective<f64>;
pub type Composite = convex::Composite<f64>;
pub type Desingularizer = desingularization::Desingularizer<f64>;
pub type Profile = desingularization::Profile<f64>;
pub type ErrorBoundCertificate = desingularization::ErrorBoundCertificate<f64>;
pub type DescentParams = descent::DescentParams<f64>;
pub type DescentRun = descent::DescentRun<f64>;
pub type StepSchedule = descent::StepSchedule<f64>;
pub type MajorantSequence = majorant::MajorantSequence<f64>;
pub type LassoInstance = error_bounds::LassoInstance<f64>;
pub type FeasibilityInstance = error_bounds::FeasibilityInstance<f64>;
pub type LinearSystemPair = error_bounds::LinearSystemPair<f64>;
