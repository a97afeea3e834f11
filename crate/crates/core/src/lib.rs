//! Mass-constrained obstacle problems on surface grids.
//!
//! The crate solves
//!
//! ```text
//! -Delta_Gamma u = ((1 + alpha) g - 1) on {u > 0},   u >= 0,   int u dS = M
//! ```
//!
//! on a flat torus or a latitude/longitude sphere, evaluates the closed-form
//! limit profiles reached as `M -> 0`, and drives mass sweeps that measure the
//! blow-up scaling laws.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod profiles;
pub mod signals;
pub mod solver;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
