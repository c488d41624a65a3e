//! Numeric tolerances shared by every module.

/// Tie detection between float objective values (route costs are irrational).
pub const VALUE: f64 = 1e-9;

/// A binary LP value counts as integral when it is this close to 0 or 1.
pub const INTEGRALITY: f64 = 1e-6;

/// Minimum violation for a separated cut to be emitted.
pub const CUT_VIOLATION: f64 = 1e-6;

/// Agreement tolerance for audits and cross-checks of leader profits.
pub const AUDIT: f64 = 1e-6;

/// Node pruning slack against the incumbent.
pub const PRUNE: f64 = 1e-6;
