//! Casimir forces from the Maxwell stress tensor integrated along
//! complex-frequency contours, together with a forward model of the
//! antenna measurement that realizes such a contour with a conducting fluid.
//!
//! Units throughout: ℏ = c = 1, lengths in units of the separation d, so
//! frequencies carry units c/d and forces per unit length ℏc/d³.

pub mod contour;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod greens;
pub mod oracle;
pub mod quadrature;
pub mod stress;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
