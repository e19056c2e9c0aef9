//! Centralized numerical tolerances.

/// Unitarity, determinant, orthonormality and exp-consistency checks.
pub const STRUCTURAL: f64 = 1e-10;

/// Hermiticity, tracelessness and exact algebraic identities.
pub const ALGEBRAIC: f64 = 1e-12;

/// Relative singular-value threshold for rank and kernel decisions.
pub const RANK: f64 = 1e-9;

/// Sphere-gradient norm below which a point counts as critical.
pub const CRITICAL: f64 = 1e-7;

/// Sphere-gradient norm above which a point counts as non-critical.
pub const NON_CRITICAL: f64 = 1e-3;

/// Default perturbation radius for the isolated-in-stratum test.
pub const ISOLATION_RADIUS: f64 = 1e-3;

/// Default number of sampled slice directions for the isolated-in-stratum test.
pub const ISOLATION_SAMPLES: usize = 500;

/// Haar starts used when estimating the distance to an orbit.
pub const ORBIT_STARTS: usize = 20;
