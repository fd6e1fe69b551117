//! Subsonic Rayleigh-type surface waves in anisotropic elastic solids.
//!
//! The crate computes spectral factorizations of the acoustic matrix
//! polynomial, the surface impedance tensor and the Rayleigh speed of a
//! homogeneous half-space, and the leading-order amplitude transport of
//! surface waves along curved, inhomogeneous boundaries.

pub mod error;
pub mod linalg;
pub mod material;
pub mod matpoly;
pub mod halfspace;
pub mod geometry;
pub mod symbols;
pub mod fixtures;
pub mod ode;
pub mod rays;
pub mod cli;

pub use error::{Error, Result};
