//! Numerical laboratory for high-codimension shrinking cylinders under
//! rescaled mean curvature flow.
//!
//! The reference geometry is the round cylinder S^k_{sqrt(2k)} x R^{n-k}
//! embedded in R^N with N >= n+1, viewed as a critical point of the Gaussian
//! area functional
//!
//!   F(Sigma) = (4 pi)^{-n/2} \int_Sigma e^{-|x|^2/4}.
//!
//! Nearby surfaces are represented as normal graphs over the cylinder and the
//! crate provides:
//!
//! * discrete geometry jets (second fundamental form, mean curvature, the
//!   shrinker quantity phi = x^perp/2 - H) for such graphs,
//! * the codimension defect scalar P together with the Simons-type curvature
//!   identities it enters,
//! * the drift Laplacian, its Jacobi fields on the cylinder, and Gaussian
//!   Sobolev norms,
//! * first-variation formulas with finite-difference cross checks,
//! * a rescaled-flow integrator in the normal-graph gauge, and
//! * the discrete Lojasiewicz / summability machinery used to extract
//!   convergence rates from energy traces.

pub mod chart;
pub mod config;
pub mod error;
pub mod flow;
pub mod gaussian;
pub mod geometry;
pub mod numerics;
pub mod rates;
pub mod report;
pub mod spectral;
pub mod variation;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
