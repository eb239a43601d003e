//! Population loss landscapes.
//!
//! For spherically symmetric inputs the loss depends on `θ` only through
//! `m = θ·θ*` and expands in Gegenbauer polynomials with nonnegative
//! coefficients `β_{j,d}`. The Gaussian reference replaces them by squared
//! Hermite coefficients and `P_{j,d}(m)` by `m^j`.

mod link;
mod lpg;
mod profile;

pub use link::{CustomLink, LinkFunction};
pub use lpg::{
    derivative_energy_check, lpg_certify, spectral_condition_check, DerivativeEnergyReport, LpgCertificate,
    SpectralReport, LPG_MIN_CONSTANT,
};
pub use profile::{
    beta_coefficients, exponent_report, gaussian_profile, information_exponent, marginal_rule, marginal_spectrum,
    monte_carlo_loss, profile_for, sobolev_moments, vector_at_correlation, ExponentReport, LossProfile, ProfileKind,
    EXPONENT_TOLERANCE, TRUNCATION_WARNING,
};
