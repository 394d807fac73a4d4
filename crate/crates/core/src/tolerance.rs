//! Default tolerances.

/// Exact algebraic identities (associativity, Leibniz, star compatibility, metric compatibility).
pub const IDENTITY: f64 = 1e-12;

/// Agreement between two routes to the same derived quantity.
pub const DERIVED: f64 = 1e-10;

/// Drift of conserved quantities along integrated flows.
pub const CONSERVATION: f64 = 1e-6;

/// Integrated trajectory against a closed-form solution at dt = 1e-3.
pub const CLOSED_FORM: f64 = 1e-6;

/// Elliptic function accuracy.
pub const SPECFUN: f64 = 1e-10;
