//! Exact arithmetic for Levi-Civita connections on `GL_n` over truncated
//! p-adic rings.
//!
//! The engine constructs tuples of Frobenius lifts on the p-adic completion
//! of `GL_n` that are metric and torsion free with respect to a tuple of
//! symmetric invertible matrices, computes their Christoffel symbols and
//! curvature, and verifies the congruences and closed forms these objects
//! satisfy.  All arithmetic is exact: coefficients live in `Z/p^N` (or an
//! unramified extension of it) and every division by `p` is asserted to be
//! exact at runtime.

pub mod config;
pub mod conformal;
pub mod curvature;
pub mod etale;
pub mod evalsolve;
pub mod lift;
pub mod mixed;
pub mod padic;
pub mod poly;
pub mod report;
pub mod ring;
pub mod runner;
pub mod solver;

mod error;

pub use error::EngineError;

/// Engine version string embedded in reports.
pub const ENGINE_VERSION: &str = concat!("padic-lc ", env!("CARGO_PKG_VERSION"));
