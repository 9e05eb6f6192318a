//! Dynamics of tent maps and their inverse limit spaces.
//!
//! The crate covers four layers:
//!
//! * [`maps`]: tent maps `T_s(x) = min(sx, s(1-x))`, quadratic maps
//!   `q_a(x) = 1 - ax^2`, critical orbits, itineraries and exact backward
//!   preimage trees of the critical point.
//! * [`lap_entropy`]: lap numbers of iterates and the topological entropy
//!   obtained from their growth rate.
//! * [`inverse_limit`], [`chains`], [`bowen`]: finite-depth points of the
//!   inverse limit `K_s`, folding patterns of the arc-component of the fixed
//!   endpoint, chain covers, and Bowen `(n, eps)`-separated-set entropy of
//!   powers of the shift homeomorphism.
//! * [`renorm`]: renormalization towers of quadratic maps and the set of
//!   entropies a self-homeomorphism of their inverse limit can have.

pub mod bowen;
pub mod chains;
pub mod error;
pub mod inverse_limit;
pub mod lap_entropy;
pub mod maps;
pub mod renorm;

pub use error::{IlimError, Result};

/// Absolute tolerance used for comparisons against the critical point and
/// chain breakpoints unless a caller supplies its own.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default budget on the number of nodes any single enumeration may visit.
pub const DEFAULT_NODE_CAP: usize = 100_000_000;
