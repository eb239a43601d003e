//! Single-index model tooling: orthogonal polynomial machinery, input
//! distributions, population loss landscapes, online spherical SGD and
//! non-Gaussian perturbation diagnostics.
//!
//! The data flow is linear. [`orthopoly`] supplies bases and quadrature,
//! [`landscape`] turns a link function and an input law into a one-dimensional
//! loss profile, [`dynamics`] runs stochastic gradient descent on the sphere,
//! and [`perturb`] measures how far a non-Gaussian input moves the landscape
//! away from its Gaussian counterpart.

pub mod dynamics;
pub mod error;
pub mod landscape;
pub mod measures;
pub mod orthopoly;
pub mod perturb;

pub use error::{Error, Result};

/// Crate version recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
