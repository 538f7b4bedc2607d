//! Modeling toolkit for planar soft bending actuators.
//!
//! The pieces, bottom to top:
//!
//! - [`spiral`] — curves whose curvature is a polynomial in arc length:
//!   tangent angles in closed form, positions by Gauss–Legendre quadrature,
//!   frames, and endpoint sensitivities.
//! - [`hermite`] — recover curvature coefficients from endpoint poses
//!   (G1 Hermite interpolation) with a damped least-squares solve.
//! - [`beam`] — large-deflection Euler–Bernoulli equilibrium of a
//!   pressurized cantilever under tip loads; the ground-truth oracle.
//! - [`dataset`] — sweep the oracle over a pressure/payload grid, extract
//!   shape representations, persist JSON-lines records.
//! - [`learn`] — small from-scratch MLPs for the forward model
//!   (pressure, payload) -> shape and the inverse model shape -> payload,
//!   plus the evaluation metrics.

pub mod beam;
pub mod dataset;
pub mod error;
pub mod hermite;
pub mod learn;
pub mod quadrature;
pub mod spiral;

pub use error::{Error, Result};
pub use quadrature::QuadratureConfig;
pub use spiral::{CurvaturePolynomial, FrameTransform, Pose, ShapeRep};
