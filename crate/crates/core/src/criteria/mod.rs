//! Hypothesis checkers for the global-solvability criteria and numerical
//! verification of their conclusions.
//!
//! Each checker evaluates its criterion's conditions pointwise on a time
//! grid and returns a [`Verdict`]: whether the hypotheses hold, the first
//! violated condition with a witness time, and the minimum slack seen.
//! Conditions are checked conservatively: a violation at any grid point is
//! final, so refining the grid can only flip a verdict from holds to
//! fails, never the other way.
//!
//! Criterion identifiers (`thm31`, `thm32`, `thm33`, `thm34`, `thm35`,
//! `thm41`, `cor41`) are the command-line labels:
//! - `thm31`: componentwise sign conditions (`a_n >= 0`, `D_n <= 0` on the
//!   active set, vanishing elsewhere) giving global solutions with
//!   nonnegative active components.
//! - `thm32`: eps-semi-definite-positive fivers giving strictly positive
//!   components.
//! - `thm33`: partitioned weighted-integral condition on `D_0` (sign
//!   changes allowed inside cells).
//! - `thm34`/`thm35`: envelope criteria bounding `q_0` below by
//!   `-sqrt(beta/alpha)` resp. above `sqrt(beta/alpha)`.
//! - `thm41`: two-sided envelope criterion for sign-changing `a_0` on a
//!   finite window, with the vector-part bound through `M(t)`.
//! - `cor41`: terminal-value counterpart of `thm41` via time reversal.

mod global;
mod verify;
mod window;

use thiserror::Error;

use crate::expr::config::ProblemSpec;
use crate::expr::{EvalError, Expr};
use crate::integrate::IntegrateError;
use crate::model::QuadError;
use crate::tol::{DEFAULT_GRID_POINTS, TAU_COND};

pub use global::{check_thm31, check_thm32, check_thm33, check_thm34, check_thm35};
pub use verify::{compare_scalar_riccati, verify_conclusion, Assertion, VerifyReport};
pub use window::{
    check_cor41, check_thm41, gamma_data, reversed_envelopes, reversed_problem,
    starred_vs_reversed_residual, GammaData, TimeDirection,
};

/// Criterion identifiers, as used by the command line and in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    Thm31,
    Thm32,
    Thm33,
    Thm34,
    Thm35,
    Thm41,
    Cor41,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Thm31 => "thm31",
            Criterion::Thm32 => "thm32",
            Criterion::Thm33 => "thm33",
            Criterion::Thm34 => "thm34",
            Criterion::Thm35 => "thm35",
            Criterion::Thm41 => "thm41",
            Criterion::Cor41 => "cor41",
        }
    }

    pub fn from_label(s: &str) -> Option<Criterion> {
        Some(match s {
            "thm31" => Criterion::Thm31,
            "thm32" => Criterion::Thm32,
            "thm33" => Criterion::Thm33,
            "thm34" => Criterion::Thm34,
            "thm35" => Criterion::Thm35,
            "thm41" => Criterion::Thm41,
            "cor41" => Criterion::Cor41,
            _ => return None,
        })
    }
}

/// Checker failure (a failed criterion is a `holds = false` verdict, not
/// an error).
#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("bracket-zero ratio unbounded at t = {t} (|value| > 1e12); condition 5) fails")]
    Bracket0Unbounded { t: f64 },
}

/// Envelope pair `alpha, beta > 0` with symbolic derivatives attached.
#[derive(Clone, Debug)]
pub struct EnvelopePair {
    pub alpha: Expr,
    pub beta: Expr,
    pub dalpha: Expr,
    pub dbeta: Expr,
}

impl EnvelopePair {
    pub fn new(alpha: Expr, beta: Expr) -> Self {
        let dalpha = alpha.diff();
        let dbeta = beta.diff();
        EnvelopePair {
            alpha,
            beta,
            dalpha,
            dbeta,
        }
    }

    /// Reads `alpha`, `beta` from the `[criterion]` keys of a problem.
    pub fn from_problem(ps: &ProblemSpec) -> Result<Self, CriteriaError> {
        match (&ps.criterion.alpha, &ps.criterion.beta) {
            (Some(a), Some(b)) => Ok(EnvelopePair::new(a.clone(), b.clone())),
            _ => Err(CriteriaError::Precondition(
                "envelope expressions `alpha` and `beta` are required".into(),
            )),
        }
    }
}

/// Envelope quadruple `alpha_1, beta_1 < 0 < alpha_2, beta_2` with
/// symbolic derivatives, for the finite-window criteria.
#[derive(Clone, Debug)]
pub struct EnvelopeQuad {
    /// `[alpha_1, alpha_2]`
    pub alpha: [Expr; 2],
    /// `[beta_1, beta_2]`
    pub beta: [Expr; 2],
    pub dalpha: [Expr; 2],
    pub dbeta: [Expr; 2],
}

impl EnvelopeQuad {
    pub fn new(alpha1: Expr, alpha2: Expr, beta1: Expr, beta2: Expr) -> Self {
        let dalpha = [alpha1.diff(), alpha2.diff()];
        let dbeta = [beta1.diff(), beta2.diff()];
        EnvelopeQuad {
            alpha: [alpha1, alpha2],
            beta: [beta1, beta2],
            dalpha,
            dbeta,
        }
    }

    pub fn from_problem(ps: &ProblemSpec) -> Result<Self, CriteriaError> {
        match (
            &ps.criterion.alpha1,
            &ps.criterion.alpha2,
            &ps.criterion.beta1,
            &ps.criterion.beta2,
        ) {
            (Some(a1), Some(a2), Some(b1), Some(b2)) => Ok(EnvelopeQuad::new(
                a1.clone(),
                a2.clone(),
                b1.clone(),
                b2.clone(),
            )),
            _ => Err(CriteriaError::Precondition(
                "envelope expressions `alpha1`, `alpha2`, `beta1`, `beta2` are required".into(),
            )),
        }
    }
}

/// Parameters a checker was invoked with; carried inside the verdict so
/// conclusion verification can rebuild the claimed bounds.
#[derive(Clone, Debug)]
pub enum CheckParams {
    SignSet { s_set: Vec<usize> },
    FiverEps { eps: f64 },
    Partition { partition: Vec<f64> },
    Envelope { env: EnvelopePair },
    Window { env: EnvelopeQuad, gamma_cap: f64 },
}

/// Structured outcome of a criterion check.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub criterion: Criterion,
    pub holds: bool,
    /// Time of the first condition violation (absent when the criterion
    /// holds).
    pub witness_t: Option<f64>,
    /// Label of the first violated condition.
    pub violated: Option<String>,
    /// Minimum slack over all conditions and grid points; negative slack
    /// beyond the tolerance means violation.
    pub margin: f64,
    /// Human-readable description of the evaluation grid.
    pub grid: String,
    /// Set when `margin < TAU_COND`, i.e. the verdict sits on the boundary.
    pub borderline: bool,
    pub params: CheckParams,
}

impl Verdict {
    /// Line-oriented `key = value` report with stable key order.
    pub fn to_report_lines(&self) -> Vec<String> {
        vec![
            format!("criterion = {}", self.criterion.label()),
            format!("holds = {}", self.holds),
            format!(
                "witness_t = {}",
                self.witness_t.map_or("none".into(), format_float)
            ),
            format!("violated = {}", self.violated.as_deref().unwrap_or("none")),
            format!("margin = {}", format_float(self.margin)),
            format!("grid = {}", self.grid),
        ]
    }
}

/// Serializes a float with 17 significant digits (round-trip exact for
/// f64). Negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// `n` evenly spaced points covering `[a, b]`, endpoints included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// The default evaluation grid for a problem: 2049 uniform points on
/// `[t0, horizon]` plus all partition endpoints.
pub fn default_grid(ps: &ProblemSpec) -> Vec<f64> {
    let mut g = uniform_grid(ps.t0, ps.horizon, DEFAULT_GRID_POINTS);
    if let Some(p) = &ps.criterion.partition {
        g.extend(p.iter().copied());
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup();
    }
    g
}

pub(crate) fn grid_description(grid: &[f64]) -> String {
    format!(
        "{} points on [{}, {}]",
        grid.len(),
        grid.first().copied().unwrap_or(f64::NAN),
        grid.last().copied().unwrap_or(f64::NAN)
    )
}

/// Accumulates condition slacks over the grid: a condition passes at a
/// point when its slack is at least `-TAU_COND`; the first violation is
/// recorded with its label and time, and the global minimum slack becomes
/// the verdict margin.
pub(crate) struct ConditionScan {
    min_slack: f64,
    first_violation: Option<(String, f64)>,
}

impl ConditionScan {
    pub(crate) fn new() -> Self {
        ConditionScan {
            min_slack: f64::INFINITY,
            first_violation: None,
        }
    }

    pub(crate) fn observe(&mut self, label: impl Fn() -> String, t: f64, slack: f64) {
        if slack < self.min_slack {
            self.min_slack = slack;
        }
        if slack < -TAU_COND && self.first_violation.is_none() {
            self.first_violation = Some((label(), t));
        }
    }

    pub(crate) fn into_verdict(
        self,
        criterion: Criterion,
        grid_desc: String,
        params: CheckParams,
    ) -> Verdict {
        let margin = if self.min_slack.is_finite() {
            self.min_slack
        } else {
            0.0
        };
        match self.first_violation {
            Some((label, t)) => Verdict {
                criterion,
                holds: false,
                witness_t: Some(t),
                violated: Some(label),
                margin,
                grid: grid_desc,
                borderline: margin.abs() < TAU_COND,
                params,
            },
            None => Verdict {
                criterion,
                holds: true,
                witness_t: None,
                violated: None,
                margin,
                grid: grid_desc,
                borderline: margin < TAU_COND,
                params,
            },
        }
    }
}
