//! Numerical verification of a passing verdict's declared conclusion, and
//! the scalar comparison oracle.
//!
//! `verify_conclusion` integrates the real 4-component system with the
//! verified initial data and asserts the criterion's claims pointwise
//! (sign bounds, envelope bounds, the vector-part growth bound, and
//! completion of the window), returning per-assertion margins. A failed
//! assertion distinguishes an escape (status) from a bound violation
//! (assertion with witness time).

use crate::expr::config::ProblemSpec;
use crate::integrate::{integrate_ivp, NumericPolicy, Status, Trajectory};
use crate::model::real_rhs;
use crate::quat::norm3;
use crate::tol::TOL_VERIFY;

use super::window::reversed_problem;
use super::{
    format_float, CheckParams, CriteriaError, Criterion, EnvelopePair, EnvelopeQuad, TimeDirection,
    Verdict,
};

/// One verified claim: its margin (the worst slack seen over the sampled
/// trajectory) and where the worst value occurred.
#[derive(Clone, Debug)]
pub struct Assertion {
    pub label: String,
    pub margin: f64,
    pub pass: bool,
    pub witness_t: Option<f64>,
}

/// Outcome of verifying the declared conclusion of a criterion.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub criterion: Criterion,
    pub status: Status,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl VerifyReport {
    /// Line-oriented `key = value` report with stable key order.
    pub fn to_report_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("criterion = {}", self.criterion.label()),
            format!("passed = {}", self.passed),
            format!("status = {}", self.status.label()),
        ];
        for a in &self.assertions {
            lines.push(format!(
                "assert[{}] = {} margin={}{}",
                a.label,
                if a.pass { "pass" } else { "fail" },
                format_float(a.margin),
                a.witness_t
                    .map(|t| format!(" at={}", format_float(t)))
                    .unwrap_or_default(),
            ));
        }
        lines
    }
}

const SAMPLES: usize = 2049;

struct SampleSet {
    times: Vec<f64>,
}

impl SampleSet {
    fn for_trajectory(traj: &Trajectory) -> Self {
        let mut times = traj.times.clone();
        times.extend(traj.sample_times(SAMPLES));
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        SampleSet { times }
    }

    /// Minimum of `f(t, state)` over the samples, with its location.
    fn min_of<F>(&self, traj: &Trajectory, mut f: F) -> Result<(f64, f64), CriteriaError>
    where
        F: FnMut(f64, &[f64]) -> Result<f64, CriteriaError>,
    {
        let mut best = (f64::INFINITY, self.times[0]);
        let mut buf = vec![0.0; traj.dim()];
        for &t in &self.times {
            traj.dense_into(t, &mut buf);
            let v = f(t, &buf)?;
            if v < best.0 {
                best = (v, t);
            }
        }
        Ok(best)
    }
}

fn assertion(label: impl Into<String>, margin: f64, pass: bool, at: f64) -> Assertion {
    Assertion {
        label: label.into(),
        margin,
        pass,
        witness_t: Some(at),
    }
}

fn completed_assertion(traj: &Trajectory, horizon: f64) -> Assertion {
    Assertion {
        label: "completed".into(),
        margin: traj.end_time() - horizon,
        pass: traj.status.is_completed(),
        witness_t: match traj.status {
            Status::Completed => None,
            Status::Escaped { t_escape } => Some(t_escape),
            Status::StepCollapse { t } => Some(t),
        },
    }
}

fn precondition(cond: bool, msg: &str) -> Result<(), CriteriaError> {
    if cond {
        Ok(())
    } else {
        Err(CriteriaError::Precondition(msg.to_string()))
    }
}

/// Integrates the system for the verified initial data and asserts the
/// declared conclusion of the criterion the verdict came from.
///
/// The initial data must satisfy the criterion's constraint (nonnegative
/// or positive active components, the envelope interval, or the
/// vector-part cap); otherwise a precondition error is returned.
pub fn verify_conclusion(
    ps: &ProblemSpec,
    verdict: &Verdict,
    init: [f64; 4],
    policy: &NumericPolicy,
) -> Result<VerifyReport, CriteriaError> {
    precondition(verdict.holds, "verdict does not hold; nothing to verify")?;
    let tol = TOL_VERIFY;
    let mut assertions = Vec::new();

    // criteria stated in original time integrate the original problem;
    // the terminal-value criterion integrates the reversed problem and
    // maps the trajectory back
    let reversed = matches!(verdict.criterion, Criterion::Cor41);
    let problem = if reversed {
        reversed_problem(ps)
    } else {
        ps.clone()
    };
    let traj = integrate_ivp(real_rhs(&problem), &init, ps.t0, ps.horizon, policy)?;
    let samples = SampleSet::for_trajectory(&traj);
    let lambda0 = ps.t0 + ps.horizon;
    // original-time coordinate of a sample time
    let otime = |t: f64| if reversed { lambda0 - t } else { t };

    match &verdict.params {
        CheckParams::SignSet { s_set } => {
            for &n in s_set {
                precondition(
                    init[n] >= 0.0,
                    &format!("gamma_{n} >= 0 required on the active set"),
                )?;
            }
            for &n in s_set {
                let (min_v, at) = samples.min_of(&traj, |_, q| Ok(q[n]))?;
                if init[n] > 0.0 {
                    assertions.push(assertion(format!("q_{n} > 0"), min_v, min_v > 0.0, at));
                } else {
                    assertions.push(assertion(format!("q_{n} >= 0"), min_v, min_v >= -tol, at));
                }
            }
        }
        CheckParams::FiverEps { .. } => {
            for (n, g) in init.iter().enumerate() {
                precondition(*g > 0.0, &format!("gamma_{n} > 0 required"))?;
            }
            for n in 0..4 {
                let (min_v, at) = samples.min_of(&traj, |_, q| Ok(q[n]))?;
                assertions.push(assertion(format!("q_{n} > 0"), min_v, min_v > 0.0, at));
            }
        }
        CheckParams::Partition { .. } => {
            precondition(init[0] >= 0.0, "gamma_0 >= 0 required")?;
            let (min_v, at) = samples.min_of(&traj, |_, q| Ok(q[0]))?;
            assertions.push(assertion("q_0 >= 0", min_v, min_v >= -tol, at));
        }
        CheckParams::Envelope { env } => {
            let bound0 = envelope_bound(env, ps.t0)?;
            match verdict.criterion {
                Criterion::Thm34 => {
                    precondition(
                        init[0] >= -bound0 - 1e-12,
                        "gamma_0 >= -sqrt(beta(t0)/alpha(t0)) required",
                    )?;
                    let (min_v, at) =
                        samples.min_of(&traj, |t, q| Ok(q[0] + envelope_bound(env, t)?))?;
                    assertions.push(assertion(
                        "q_0 >= -sqrt(beta/alpha)",
                        min_v,
                        min_v >= -tol,
                        at,
                    ));
                }
                _ => {
                    precondition(
                        init[0] >= bound0 - 1e-12,
                        "gamma_0 >= sqrt(beta(t0)/alpha(t0)) required",
                    )?;
                    let (min_v, at) =
                        samples.min_of(&traj, |t, q| Ok(q[0] - envelope_bound(env, t)?))?;
                    assertions.push(assertion(
                        "q_0 >= sqrt(beta/alpha)",
                        min_v,
                        min_v >= -tol,
                        at,
                    ));
                }
            }
        }
        CheckParams::Window { env, gamma_cap } => {
            let gamma_v = norm3([init[1], init[2], init[3]]);
            precondition(
                gamma_v <= gamma_cap + 1e-12,
                "|(gamma_1, gamma_2, gamma_3)| <= Gamma required",
            )?;
            // bounds (lower, upper) on q_0 and the anchor time of the
            // initial-interval constraint
            let anchor = if reversed { ps.horizon } else { ps.t0 };
            let (lo_ix, hi_ix) = if reversed { (0, 1) } else { (1, 0) };
            // forward: -sqrt(beta_2/alpha_2) <= q_0 <= sqrt(beta_1/alpha_1)
            // reversed: -sqrt(beta_1/alpha_1) <= q_0 <= sqrt(beta_2/alpha_2)
            let lo_bound = |t: f64| env_ratio(env, lo_ix, t).map(|v| -v);
            let hi_bound = |t: f64| env_ratio(env, hi_ix, t);
            precondition(
                init[0] >= lo_bound(anchor)? - 1e-12 && init[0] <= hi_bound(anchor)? + 1e-12,
                "gamma_0 outside the admissible envelope interval",
            )?;

            let (min_lo, at_lo) = samples.min_of(&traj, |t, q| Ok(q[0] - lo_bound(otime(t))?))?;
            assertions.push(assertion(
                "q_0 >= lower envelope bound",
                min_lo,
                min_lo >= -tol,
                otime(at_lo),
            ));
            let (min_hi, at_hi) = samples.min_of(&traj, |t, q| Ok(hi_bound(otime(t))? - q[0]))?;
            assertions.push(assertion(
                "q_0 <= upper envelope bound",
                min_hi,
                min_hi >= -tol,
                otime(at_hi),
            ));

            let direction = if reversed {
                TimeDirection::Reversed
            } else {
                TimeDirection::Forward
            };
            let gd = super::window::gamma_data(ps, *gamma_cap, direction)?;
            let (min_vec, at_vec) = samples.min_of(&traj, |t, q| {
                let budget = gamma_v + gd.m_of(otime(t))?;
                Ok(budget - norm3([q[1], q[2], q[3]]))
            })?;
            assertions.push(assertion(
                "|[q]_v| <= |[q(anchor)]_v| + M",
                min_vec,
                min_vec >= -tol,
                otime(at_vec),
            ));
        }
    }

    assertions.push(completed_assertion(&traj, ps.horizon));
    let passed = assertions.iter().all(|a| a.pass);
    Ok(VerifyReport {
        criterion: verdict.criterion,
        status: traj.status,
        assertions,
        passed,
    })
}

fn envelope_bound(env: &EnvelopePair, t: f64) -> Result<f64, CriteriaError> {
    let alpha = env.alpha.eval(t)?;
    let beta = env.beta.eval(t)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(CriteriaError::Precondition(format!(
            "envelopes must be positive at t = {t}"
        )));
    }
    Ok((beta / alpha).sqrt())
}

/// `sqrt(beta_i / alpha_i)(t)` for the two-sided envelopes (the ratio is
/// positive under the sign pattern).
fn env_ratio(env: &EnvelopeQuad, i: usize, t: f64) -> Result<f64, CriteriaError> {
    let alpha = env.alpha[i].eval(t)?;
    let beta = env.beta[i].eval(t)?;
    let ratio = beta / alpha;
    if !(ratio > 0.0) {
        return Err(CriteriaError::Precondition(format!(
            "envelope ratio beta_{}/alpha_{} not positive at t = {t}",
            i + 1,
            i + 1
        )));
    }
    Ok(ratio.sqrt())
}

/// Comparison oracle for two scalar Riccati equations
/// `y' + f y^2 + g y + h = 0` and `y' + f1 y^2 + g1 y + h1 = 0` in the
/// special case `f = f1 >= 0`, `g = g1`, `h1 >= h` pointwise: the solution
/// with the larger right-hand data stays below. Returns true when
/// `y0(t) >= y1(t) - 1e-7` for as long as both solutions exist.
#[allow(clippy::too_many_arguments)]
pub fn compare_scalar_riccati(
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    h: &dyn Fn(f64) -> f64,
    f1: &dyn Fn(f64) -> f64,
    g1: &dyn Fn(f64) -> f64,
    h1: &dyn Fn(f64) -> f64,
    y1_0: f64,
    gamma0: f64,
    t0: f64,
    t_end: f64,
    policy: &NumericPolicy,
) -> Result<bool, CriteriaError> {
    const TAU: f64 = 1e-9;
    for k in 0..=200 {
        let t = t0 + (t_end - t0) * k as f64 / 200.0;
        precondition(f(t) >= -TAU, &format!("f >= 0 required (f({t}) < 0)"))?;
        precondition(
            (f(t) - f1(t)).abs() <= TAU,
            &format!("special case requires f1 = f (differs at t = {t})"),
        )?;
        precondition(
            (g(t) - g1(t)).abs() <= TAU,
            &format!("special case requires g1 = g (differs at t = {t})"),
        )?;
        precondition(
            h1(t) >= h(t) - TAU,
            &format!("h1 >= h required (violated at t = {t})"),
        )?;
    }
    precondition(gamma0 >= y1_0 - TAU, "gamma0 >= y1(t0) required")?;

    let run = |ff: &dyn Fn(f64) -> f64,
               gg: &dyn Fn(f64) -> f64,
               hh: &dyn Fn(f64) -> f64,
               y0: f64|
     -> Result<Trajectory, CriteriaError> {
        let traj = integrate_ivp(
            |t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = -(ff(t) * y[0] * y[0] + gg(t) * y[0] + hh(t));
                Ok(())
            },
            &[y0],
            t0,
            t_end,
            policy,
        )?;
        Ok(traj)
    };
    let traj0 = run(f, g, h, gamma0)?;
    let traj1 = run(f1, g1, h1, y1_0)?;
    let common_end = traj0.end_time().min(traj1.end_time());
    for k in 0..=500 {
        let t = t0 + (common_end - t0) * k as f64 / 500.0;
        if traj0.dense(t)[0] < traj1.dense(t)[0] - 1e-7 {
            return Ok(false);
        }
    }
    Ok(true)
}
