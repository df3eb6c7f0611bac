//! Numerical toolkit for quaternionic Riccati equations
//! `q' + q a(t) q + b(t) q + q c(t) + d(t) = 0`.
//!
//! The crate builds the equivalent real 4-component system and the 4x4
//! matrix formulation, integrates them with an adaptive embedded
//! Runge-Kutta method (with finite-escape-time detection), evaluates the
//! hypotheses of a family of global-solvability criteria on user-supplied
//! coefficient functions, and verifies the predicted conclusions (sign
//! bounds, envelope bounds, global existence, non-conjugation of the
//! associated linear system) by direct integration.
//!
//! Modules:
//! - [`quat`]: quaternion value type, Hamilton algebra, 4x4 symbol matrices.
//! - [`expr`]: coefficient-function parser, evaluator, symbolic derivative,
//!   and problem configuration files.
//! - [`model`]: right-hand sides of the real, matrix and linear systems,
//!   derived coefficients, fivers, coefficient transformations, and the
//!   weighted-exponential quadrature.
//! - [`integrate`]: adaptive RK5(4) initial-value solver with dense output,
//!   blow-up detection and sign-crossing events.
//! - [`criteria`]: criterion checkers (`thm31` .. `cor41`), conclusion
//!   verification, and the scalar comparison oracle.
//! - [`nonconj`]: linear-system non-conjugation harness and the Liouville
//!   determinant identity check.
//!
//! Checking a criterion and verifying its conclusion:
//!
//! ```
//! use qriccati::criteria::{check_thm31, default_grid, verify_conclusion};
//! use qriccati::{NumericPolicy, ProblemSpec};
//!
//! // a = 1, d = -1: componentwise q' = -q^2 + 1, global from gamma_0 = 1
//! let ps = ProblemSpec::constant(
//!     [1.0, 0.0, 0.0, 0.0],
//!     [0.0; 4],
//!     [0.0; 4],
//!     [-1.0, 0.0, 0.0, 0.0],
//!     0.0,
//!     20.0,
//!     [1.0, 0.0, 0.0, 0.0],
//! );
//! let verdict = check_thm31(&ps, &[0, 1, 2, 3], &default_grid(&ps)).unwrap();
//! assert!(verdict.holds);
//! let report = verify_conclusion(&ps, &verdict, ps.gamma, &NumericPolicy::default()).unwrap();
//! assert!(report.passed);
//! ```

// validation guards use negated comparisons so NaN parameters are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod expr;
pub mod integrate;
pub mod model;
pub mod nonconj;
pub mod quat;
pub mod tol;

pub use expr::config::ProblemSpec;
pub use expr::Expr;
pub use integrate::{NumericPolicy, Status, Trajectory};
pub use quat::{Mat4, Quaternion};
