//! Checkers for the half-line criteria: componentwise sign conditions,
//! fiver positivity, the partitioned integral condition, and the
//! single-envelope bounds.

use crate::expr::config::ProblemSpec;
use crate::expr::EvalError;
use crate::model::quad::guarded_exp;
use crate::model::{
    check_fiver_eps_mode, derived_coefficients, CumulativeIntegral, DerivedCoefficients, Fiver,
    IghEvaluator,
};
use crate::tol::{TAU_INT, TAU_ZERO};

use super::{
    grid_description, CheckParams, ConditionScan, CriteriaError, Criterion, EnvelopePair, Verdict,
};

fn eval4(arr: &[crate::expr::Expr; 4], t: f64) -> Result<[f64; 4], EvalError> {
    Ok([
        arr[0].eval(t)?,
        arr[1].eval(t)?,
        arr[2].eval(t)?,
        arr[3].eval(t)?,
    ])
}

/// Componentwise sign criterion on an active set `S`: on every grid point,
/// `a_n >= 0` and `D_n <= 0` for `n` in `S` (with `p_{n,m} = 0` wherever
/// `a_n` vanishes), and `a_n == 0` off `S`.
///
/// Conclusion when it holds: for initial data `gamma_n >= 0` on `S` the
/// solution is global with `q_n(t) >= 0` there, strictly positive where
/// `gamma_n > 0`.
pub fn check_thm31(
    ps: &ProblemSpec,
    s_set: &[usize],
    grid: &[f64],
) -> Result<Verdict, CriteriaError> {
    if s_set.is_empty() {
        return Err(CriteriaError::Precondition(
            "S must be a nonempty subset of {0,1,2,3}".into(),
        ));
    }
    if s_set.iter().any(|&n| n > 3) {
        return Err(CriteriaError::Precondition(
            "S may only contain indices 0..3".into(),
        ));
    }
    let dc = derived_coefficients(ps);
    let in_s = |n: usize| s_set.contains(&n);
    let mut scan = ConditionScan::new();
    for &t in grid {
        let a = eval4(&ps.a, t)?;
        // complement first: a_n must vanish identically off S
        for (n, a_n) in a.iter().enumerate() {
            if !in_s(n) {
                scan.observe(|| format!("a_{n} == 0 (n in O)"), t, -a_n.abs());
            }
        }
        for (n, &a_n) in a.iter().enumerate() {
            if !in_s(n) {
                continue;
            }
            scan.observe(|| format!("a_{n} >= 0"), t, a_n);
            if a_n.abs() <= TAU_ZERO {
                for m in 1..=3 {
                    let p = dc.p_nm(n, m, t)?;
                    scan.observe(
                        || format!("p_{{{n},{m}}} == 0 where a_{n} == 0"),
                        t,
                        -p.abs(),
                    );
                }
            }
            let d_n = dc.d_n(n, t)?;
            scan.observe(|| format!("D_{n} <= 0"), t, -d_n);
        }
    }
    Ok(scan.into_verdict(
        Criterion::Thm31,
        grid_description(grid),
        CheckParams::SignSet {
            s_set: s_set.to_vec(),
        },
    ))
}

/// Continuous slack of the fiver test (informational; the boolean from
/// `check_fiver_eps_mode` is authoritative).
fn fiver_slack(f: &Fiver, eps: f64, literal_ls: bool) -> f64 {
    let bound = (f.l + eps).sqrt();
    let max = f.q.max(f.r).max(f.s);
    let min = f.q.min(f.r).min(f.s);
    let floor = if literal_ls { f.l + f.s } else { f.l + eps };
    let branch1 = max - bound;
    let branch2 = min
        .min(bound - max)
        .min(f.q * f.q + f.r * f.r + f.s * f.s - floor);
    f.p.min(f.l).min(branch1.max(branch2))
}

/// Fiver criterion: all four fivers `L_n(t)` must be
/// eps-semi-definite-positive at every grid point.
///
/// Conclusion when it holds: for `gamma_n > 0` (all `n`) the solution is
/// global with `q_n(t) > 0`.
pub fn check_thm32(
    ps: &ProblemSpec,
    eps: f64,
    grid: &[f64],
    literal_fiver_floor: bool,
) -> Result<Verdict, CriteriaError> {
    if !(eps > 0.0) {
        return Err(CriteriaError::Precondition("epsilon > 0 required".into()));
    }
    let dc = derived_coefficients(ps);
    let mut scan = ConditionScan::new();
    for &t in grid {
        for n in 0..4 {
            let f = dc.fiver(n, t)?;
            let check = check_fiver_eps_mode(&f, eps, literal_fiver_floor);
            let slack = fiver_slack(&f, eps, literal_fiver_floor);
            // the boolean decides; the slack only reports how close it was
            let effective = if check.ok {
                slack.max(0.0)
            } else {
                slack.min(-2.0 * crate::tol::TAU_COND)
            };
            scan.observe(|| format!("fiver L_{n}"), t, effective);
        }
    }
    Ok(scan.into_verdict(
        Criterion::Thm32,
        grid_description(grid),
        CheckParams::FiverEps { eps },
    ))
}

/// One cell of the partitioned integral condition: all machinery to
/// evaluate `K(t) = integral_lo^t exp{ integral_lo^tau [g - I_{g,D0}(lo,
/// .)] } D_0(tau) dtau` pointwise.
struct CellCondition {
    k_cum: CumulativeIntegral,
}

impl CellCondition {
    fn build(
        dc: &DerivedCoefficients,
        ps: &ProblemSpec,
        lo: f64,
        hi: f64,
    ) -> Result<Self, CriteriaError> {
        let g = |s: f64| -> Result<f64, crate::model::QuadError> {
            Ok(ps.b[0].eval(s)? + ps.c[0].eval(s)?)
        };
        let d0 = |s: f64| -> Result<f64, crate::model::QuadError> { Ok(dc.d_n(0, s)?) };
        let igh = IghEvaluator::build(g, d0, lo, hi)?;
        let w_cum = CumulativeIntegral::build(|s| Ok(g(s)? - igh.eval(s)?), lo, hi)?;
        let k_cum = CumulativeIntegral::build(
            |tau| Ok(guarded_exp(w_cum.eval(tau), tau)? * d0(tau)?),
            lo,
            hi,
        )?;
        Ok(CellCondition { k_cum })
    }

    fn k(&self, t: f64) -> f64 {
        self.k_cum.eval(t)
    }
}

/// Partitioned integral criterion (only `a_0` may be nonzero): on each
/// partition cell `[t_m, t_{m+1})` the exponentially weighted integral of
/// `D_0` from `t_m` must stay nonpositive. `D_0` may change sign inside
/// cells.
///
/// Conclusion when it holds: for `gamma_0 >= 0` the solution is global
/// with `q_0(t) >= 0`.
pub fn check_thm33(
    ps: &ProblemSpec,
    partition: &[f64],
    grid: &[f64],
) -> Result<Verdict, CriteriaError> {
    // precondition: the imaginary leading coefficients vanish identically
    for n in 1..4 {
        for &t in grid {
            let v = ps.a[n].eval(t)?;
            if v.abs() > crate::tol::TAU_COND {
                return Err(CriteriaError::Precondition(format!(
                    "a_{n} must vanish identically (a_{n}({t}) = {v})"
                )));
            }
        }
    }
    for w in partition.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CriteriaError::Precondition(
                "partition must be strictly increasing".into(),
            ));
        }
    }
    if partition
        .iter()
        .any(|&p| p < ps.t0 - 1e-12 || p > ps.horizon + 1e-12)
    {
        return Err(CriteriaError::Precondition(
            "partition must be contained in [t0, horizon]".into(),
        ));
    }

    let dc = derived_coefficients(ps);
    let mut scan = ConditionScan::new();
    for &t in grid {
        scan.observe(|| "a_0 >= 0".into(), t, ps.a[0].eval(t)?);
    }

    // cells cover [t0, horizon]; every cell is checked, including the first
    let mut cuts: Vec<f64> = Vec::with_capacity(partition.len() + 2);
    cuts.push(ps.t0);
    for &p in partition {
        if p > ps.t0 && p < ps.horizon {
            cuts.push(p);
        }
    }
    cuts.push(ps.horizon);
    cuts.dedup();

    for (m, pair) in cuts.windows(2).enumerate() {
        let (lo, hi) = (pair[0], pair[1]);
        let cell = CellCondition::build(&dc, ps, lo, hi)?;
        let mut points: Vec<f64> = grid.iter().copied().filter(|&t| t > lo && t < hi).collect();
        points.push(hi);
        for t in points {
            let k = cell.k(t);
            scan.observe(|| format!("integral condition on cell {m}"), t, TAU_INT - k);
        }
    }
    Ok(scan.into_verdict(
        Criterion::Thm33,
        grid_description(grid),
        CheckParams::Partition {
            partition: partition.to_vec(),
        },
    ))
}

struct EnvelopeAt {
    alpha: f64,
    beta: f64,
    log_deriv_half: f64,
    sqrt_ab: f64,
}

fn envelope_at(env: &EnvelopePair, t: f64) -> Result<EnvelopeAt, CriteriaError> {
    let alpha = env.alpha.eval(t)?;
    let beta = env.beta.eval(t)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(CriteriaError::Precondition(format!(
            "envelopes must be positive on the window: alpha({t}) = {alpha}, beta({t}) = {beta}"
        )));
    }
    let da = env.dalpha.eval(t)?;
    let db = env.dbeta.eval(t)?;
    Ok(EnvelopeAt {
        alpha,
        beta,
        log_deriv_half: 0.5 * (da / alpha - db / beta),
        sqrt_ab: (alpha * beta).sqrt(),
    })
}

fn check_envelope_common(
    ps: &ProblemSpec,
    dc: &DerivedCoefficients,
    env: &EnvelopePair,
    scan: &mut ConditionScan,
    t: f64,
) -> Result<EnvelopeAt, CriteriaError> {
    let at = envelope_at(env, t)?;
    let a = eval4(&ps.a, t)?;
    scan.observe(|| "A_1: a_0 >= 0".into(), t, a[0]);
    scan.observe(|| "A_1: a_0 <= alpha".into(), t, at.alpha - a[0]);
    scan.observe(|| "A_1: D_0 <= beta".into(), t, at.beta - dc.d_n(0, t)?);
    for (n, a_n) in a.iter().enumerate().skip(1) {
        scan.observe(|| format!("A_1: a_{n} == 0"), t, -a_n.abs());
    }
    Ok(at)
}

/// Lower-envelope criterion: conditions `A_1` (`0 <= a_0 <= alpha`,
/// `D_0 <= beta`, vanishing imaginary leading coefficients) and `B_1`
/// (`b_0 + c_0 >= (alpha'/alpha - beta'/beta)/2 + sqrt(alpha beta)`).
///
/// Conclusion when it holds: for `gamma_0 >= -sqrt(beta(t0)/alpha(t0))`
/// the solution is global with `q_0(t) >= -sqrt(beta(t)/alpha(t))`.
/// `factor_two` switches to the factor-2 form of the bound.
pub fn check_thm34(
    ps: &ProblemSpec,
    env: &EnvelopePair,
    grid: &[f64],
    factor_two: bool,
) -> Result<Verdict, CriteriaError> {
    let dc = derived_coefficients(ps);
    let fac = if factor_two { 2.0 } else { 1.0 };
    let mut scan = ConditionScan::new();
    for &t in grid {
        let at = check_envelope_common(ps, &dc, env, &mut scan, t)?;
        let b0c0 = ps.b[0].eval(t)? + ps.c[0].eval(t)?;
        let required = at.log_deriv_half + fac * at.sqrt_ab;
        scan.observe(|| "B_1".into(), t, b0c0 - required);
    }
    Ok(scan.into_verdict(
        Criterion::Thm34,
        grid_description(grid),
        CheckParams::Envelope { env: env.clone() },
    ))
}

/// Upper-envelope criterion: conditions `A_1` of the lower-envelope
/// criterion and `C_1`
/// (`b_0 + c_0 <= (alpha'/alpha - beta'/beta)/2 - sqrt(alpha beta)`).
///
/// Conclusion when it holds: for `gamma_0 >= sqrt(beta(t0)/alpha(t0))`
/// the solution is global with `q_0(t) >= sqrt(beta(t)/alpha(t))`.
pub fn check_thm35(
    ps: &ProblemSpec,
    env: &EnvelopePair,
    grid: &[f64],
    factor_two: bool,
) -> Result<Verdict, CriteriaError> {
    let dc = derived_coefficients(ps);
    let fac = if factor_two { 2.0 } else { 1.0 };
    let mut scan = ConditionScan::new();
    for &t in grid {
        let at = check_envelope_common(ps, &dc, env, &mut scan, t)?;
        let b0c0 = ps.b[0].eval(t)? + ps.c[0].eval(t)?;
        let allowed = at.log_deriv_half - fac * at.sqrt_ab;
        scan.observe(|| "C_1".into(), t, allowed - b0c0);
    }
    Ok(scan.into_verdict(
        Criterion::Thm35,
        grid_description(grid),
        CheckParams::Envelope { env: env.clone() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::uniform_grid;
    use crate::expr::{parse_expr, Expr};

    fn constant_ps(a: [f64; 4], b: [f64; 4], c: [f64; 4], d: [f64; 4]) -> ProblemSpec {
        ProblemSpec::constant(a, b, c, d, 0.0, 10.0, [0.0; 4])
    }

    #[test]
    fn thm31_worked_examples() {
        let grid = uniform_grid(0.0, 10.0, 129);

        // a = 1, b = c = 0, d = -1, full active set: holds
        let ps = constant_ps(
            [1.0, 0.0, 0.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [-1.0, 0.0, 0.0, 0.0],
        );
        let v = check_thm31(&ps, &[0, 1, 2, 3], &grid).unwrap();
        assert!(v.holds);
        assert!(v.witness_t.is_none() && v.violated.is_none());

        // flipping the sign of d_0 flips the verdict and names D_0
        let ps = constant_ps(
            [1.0, 0.0, 0.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [1.0, 0.0, 0.0, 0.0],
        );
        let v = check_thm31(&ps, &[0], &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("D_0 <= 0"));
        assert_eq!(v.witness_t, Some(0.0));

        // a = i with S = {0}: index 1 must vanish on the complement
        let ps = constant_ps([0.0, 1.0, 0.0, 0.0], [0.0; 4], [0.0; 4], [0.0; 4]);
        let v = check_thm31(&ps, &[0], &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("a_1 == 0 (n in O)"));

        // degenerate coupling: a_0 = 0 on S requires p_{0,m} = 0
        let ps = constant_ps(
            [0.0; 4],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0; 4],
        );
        let v = check_thm31(&ps, &[0], &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("p_{0,1} == 0 where a_0 == 0"));

        // preconditions
        assert!(matches!(
            check_thm31(&ps, &[], &grid),
            Err(CriteriaError::Precondition(_))
        ));
        assert!(matches!(
            check_thm31(&ps, &[7], &grid),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn thm32_rejects_all_zero_and_nonpositive_eps() {
        let grid = uniform_grid(0.0, 10.0, 65);
        let ps = constant_ps([0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4]);
        let v = check_thm32(&ps, 1.0, &grid, false).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("fiver L_0"));
        assert!(matches!(
            check_thm32(&ps, 0.0, &grid, false),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn thm33_positive_discriminant_fails_immediately() {
        let grid = uniform_grid(0.0, 10.0, 129);
        // D_0 = +4: the weighted integral turns positive right away
        let ps = constant_ps(
            [1.0, 0.0, 0.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [1.0, 0.0, 0.0, 0.0],
        );
        let v = check_thm33(&ps, &[], &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("integral condition on cell 0"));
        let w = v.witness_t.unwrap();
        assert!(w > 0.0 && w < 0.2, "witness at {w}");

        // nonvanishing imaginary leading coefficient is a precondition error
        let mut bad = ps.clone();
        bad.a[1] = Expr::Num(0.5);
        assert!(matches!(
            check_thm33(&bad, &[], &grid),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn thm34_envelope_cap_violation() {
        let grid = uniform_grid(0.0, 10.0, 65);
        // a_0 = 2 exceeds alpha = 1
        let ps = constant_ps(
            [2.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
        );
        let env = EnvelopePair::new(Expr::Num(1.0), Expr::Num(1.0));
        let v = check_thm34(&ps, &env, &grid, false).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("A_1: a_0 <= alpha"));

        // nonpositive envelope is a precondition failure
        let bad = EnvelopePair::new(Expr::Num(-1.0), Expr::Num(1.0));
        assert!(matches!(
            check_thm34(&ps, &bad, &grid, false),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn thm35_needs_strongly_negative_damping() {
        let grid = uniform_grid(0.0, 10.0, 65);
        let ps = constant_ps(
            [1.0, 0.0, 0.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [-1.0, 0.0, 0.0, 0.0],
        );
        let env = EnvelopePair::new(Expr::Num(1.0), Expr::Num(1.0));
        let v = check_thm35(&ps, &env, &grid, false).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("C_1"));
    }

    #[test]
    fn thm35_exponential_envelope_uses_symbolic_derivative() {
        // beta = e^{2t}: the bound is (1/2)(0 - 2) - e^t = -1 - e^t, and
        // b_0 + c_0 = -2 e^t - 2 stays below it
        let mut ps = ProblemSpec::zero_on(0.0, 3.0);
        ps.a[0] = Expr::Num(1.0);
        ps.b[0] = parse_expr("-exp(t) - 1").unwrap();
        ps.c[0] = parse_expr("-exp(t) - 1").unwrap();
        ps.d[0] = Expr::Num(-1.0);
        let env = EnvelopePair::new(Expr::Num(1.0), parse_expr("exp(2*t)").unwrap());
        let grid = uniform_grid(0.0, 3.0, 257);
        let v = check_thm35(&ps, &env, &grid, false).unwrap();
        assert!(v.holds, "violated: {:?} at {:?}", v.violated, v.witness_t);
    }
}
