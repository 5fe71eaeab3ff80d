//! Multimode squeezed light from pulsed parametric down-conversion in lossy
//! media.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod continuous;
pub mod coupling;
pub mod discrete;
pub mod dispersion;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod lossless;
pub mod ode;
pub mod output;
pub mod scenario;

pub use error::{Error, Result};
