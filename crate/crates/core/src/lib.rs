//! Numerical laboratory for doubly warped products
//! `[0, ∞) ×_f S^{k-1} ×_h S¹` and their universal covers.
//!
//! * [`warp`]: the warp pairs `(f, h)`.
//! * [`curvature`]: closed-form Ricci curvatures and a finite-difference oracle.
//! * [`geodesic`]: Clairaut geodesics on the strip `ℝ ×_h̄ ℝ`.
//! * [`cover`]: deck action and covering-space distances from the base fiber.
//! * [`asymptotics`]: Busemann estimates, non-properness certificates and cone probes.
//! * [`cli`]: configuration and the command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod cover;
pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod numeric;
pub mod warp;

pub use error::{Error, Result};
