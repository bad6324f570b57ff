//! Orbital integrals over compact Lie groups.
//!
//! The crate evaluates
//!
//! ```text
//! Π(h1) Π(h2) ∫_G e^{⟨Ad_g h1, h2⟩} dg = [[Π,Π]]/|W| · Σ_w ε(w) e^{⟨w h1, h2⟩}
//! ```
//!
//! in closed form and checks it against Haar Monte Carlo, saddle-point
//! analysis on adjoint orbits, heat-flow residuals on the Cartan subalgebra,
//! and the Weyl/Kirillov character formulas.

// Indexed loops mirror the matrix formulas; `!(x > 0.0)` rejects NaN on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closedform;
pub mod error;
pub mod groups;
pub mod heatflow;
pub mod numeric;
pub mod rootsys;
pub mod saddle;

pub use error::{Error, Result};
