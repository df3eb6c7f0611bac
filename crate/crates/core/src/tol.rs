//! Shared numerical tolerances and thresholds.
//!
//! Every fixed threshold used by the checkers and the verification harness
//! lives here so that the acceptance suite and the library agree on the
//! exact values.

/// Absolute tolerance for validating the sign pattern of a symbol matrix.
/// Symbols produced by integration accumulate roundoff.
pub const TAU_SYM: f64 = 1e-9;

/// Threshold deciding the `a_n(t) = 0` branch of the derived coefficients
/// `D_n` and of the bracket-zero ratio.
pub const TAU_ZERO: f64 = 1e-12;

/// Slack allowed on pointwise grid inequalities (`<=` / `>=` with equality).
pub const TAU_COND: f64 = 1e-9;

/// Slack allowed on the integral condition of the `thm33` criterion.
pub const TAU_INT: f64 = 1e-9;

/// Absolute tolerance target for the adaptive quadrature.
pub const QUAD_ABS_TOL: f64 = 1e-10;

/// Relative (per-segment) tolerance floor for the adaptive quadrature;
/// keeps exponentially weighted integrands convergent in f64.
pub const QUAD_REL_TOL: f64 = 1e-12;

/// Maximum recursion depth of the adaptive quadrature.
pub const QUAD_MAX_DEPTH: u32 = 40;

/// Absolute slack on state bounds asserted by conclusion verification.
pub const TOL_VERIFY: f64 = 1e-6;

/// Default number of grid points per window for pointwise condition checks.
pub const DEFAULT_GRID_POINTS: usize = 2049;

/// Norm below which a solution vector of the linear system counts as
/// (numerically) hitting zero in the non-conjugation harness.
pub const NONCONJ_NORM_FLOOR: f64 = 1e-8;

/// Magnitude above which the bracket-zero ratio counts as unbounded.
pub const BRACKET0_BOUND: f64 = 1e12;
