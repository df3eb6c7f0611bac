//! Finite-window criteria for sign-changing leading coefficient: the
//! growth data `M(t)`, `R_Gamma(t)` and their time-reversed (starred)
//! versions, the two-sided envelope checker, and its terminal-value
//! counterpart built by time reversal.

use crate::expr::config::ProblemSpec;
use crate::expr::{EvalError, Expr};
use crate::model::{reflect_problem, CumulativeIntegral};
use crate::quat::norm3;
use crate::tol::{BRACKET0_BOUND, DEFAULT_GRID_POINTS, TAU_ZERO};

use super::{
    grid_description, uniform_grid, CheckParams, ConditionScan, CriteriaError, Criterion,
    EnvelopeQuad, Verdict,
};

/// Direction of the accumulated bounds: `Forward` integrates from `t0`
/// and takes running suprema over `[t0, t]`; `Reversed` integrates to the
/// horizon and takes suprema over `[t, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    Reversed,
}

/// The accumulated growth data of the finite-window criterion:
/// `M(t) = integral |d_v| + sup bracket0 / 2` and
/// `R_Gamma(t) = |a_0| (Gamma + M)^2 + sum |b_n + c_n| (Gamma + M)`,
/// where `bracket0` is `sqrt(sum (b_n+c_n)^2) / a_0` where `a_0 != 0` and
/// zero elsewhere.
pub struct GammaData {
    pub gamma_cap: f64,
    direction: TimeDirection,
    dv_cum: CumulativeIntegral,
    sup_grid: Vec<f64>,
    sup_vals: Vec<f64>,
    a0: Expr,
    bc_plus: [Expr; 3],
}

/// Builds the growth data for the problem window. Detects an unbounded
/// bracket-zero ratio (condition 5 violation) while scanning.
pub fn gamma_data(
    ps: &ProblemSpec,
    gamma_cap: f64,
    direction: TimeDirection,
) -> Result<GammaData, CriteriaError> {
    if !(gamma_cap > 0.0) {
        return Err(CriteriaError::Precondition("Gamma > 0 required".into()));
    }
    let bc_plus: [Expr; 3] = [
        ps.b[1].clone().add(ps.c[1].clone()).simplify(),
        ps.b[2].clone().add(ps.c[2].clone()).simplify(),
        ps.b[3].clone().add(ps.c[3].clone()).simplify(),
    ];
    let d_v_norm = {
        let d = ps.d.clone();
        move |t: f64| -> Result<f64, crate::model::QuadError> {
            let dv = [d[1].eval(t)?, d[2].eval(t)?, d[3].eval(t)?];
            Ok(norm3(dv))
        }
    };
    let dv_cum = CumulativeIntegral::build(d_v_norm, ps.t0, ps.horizon)?;

    // running sup of bracket0 on the default grid refined by three levels
    // of midpoints
    let mut sup_grid = uniform_grid(ps.t0, ps.horizon, DEFAULT_GRID_POINTS);
    for _ in 0..3 {
        let mut refined = Vec::with_capacity(sup_grid.len() * 2);
        for w in sup_grid.windows(2) {
            refined.push(w[0]);
            refined.push(0.5 * (w[0] + w[1]));
        }
        refined.push(*sup_grid.last().unwrap());
        sup_grid = refined;
    }
    let gd_partial = GammaData {
        gamma_cap,
        direction,
        dv_cum,
        sup_grid: Vec::new(),
        sup_vals: Vec::new(),
        a0: ps.a[0].clone(),
        bc_plus,
    };
    let mut raw = Vec::with_capacity(sup_grid.len());
    for &t in &sup_grid {
        raw.push(gd_partial.bracket0(t)?);
    }
    let sup_vals = match direction {
        TimeDirection::Forward => {
            let mut acc = f64::NEG_INFINITY;
            raw.iter()
                .map(|&v| {
                    acc = acc.max(v);
                    acc
                })
                .collect()
        }
        TimeDirection::Reversed => {
            let mut rev: Vec<f64> = Vec::with_capacity(raw.len());
            let mut acc = f64::NEG_INFINITY;
            for &v in raw.iter().rev() {
                acc = acc.max(v);
                rev.push(acc);
            }
            rev.reverse();
            rev
        }
    };
    Ok(GammaData {
        sup_grid,
        sup_vals,
        ..gd_partial
    })
}

impl GammaData {
    /// `sqrt(sum_n (b_n+c_n)^2) / a_0` where `|a_0| > TAU_ZERO`, zero
    /// elsewhere; errors when the magnitude exceeds the boundedness guard.
    pub fn bracket0(&self, t: f64) -> Result<f64, CriteriaError> {
        let a0 = self.a0.eval(t)?;
        if a0.abs() <= TAU_ZERO {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for e in &self.bc_plus {
            let v = e.eval(t)?;
            sum += v * v;
        }
        let val = sum.sqrt() / a0;
        if val.abs() > BRACKET0_BOUND {
            return Err(CriteriaError::Bracket0Unbounded { t });
        }
        Ok(val)
    }

    fn sup_part(&self, t: f64) -> Result<f64, CriteriaError> {
        let i = match self
            .sup_grid
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => (i - 1).min(self.sup_grid.len() - 1),
        };
        let grid_sup = match self.direction {
            TimeDirection::Forward => self.sup_vals[i],
            TimeDirection::Reversed => {
                let j = if self.sup_grid[i] < t && i + 1 < self.sup_vals.len() {
                    i + 1
                } else {
                    i
                };
                self.sup_vals[j]
            }
        };
        Ok(grid_sup.max(self.bracket0(t)?))
    }

    /// `M(t)` (forward) or `M*(t)` (reversed).
    pub fn m_of(&self, t: f64) -> Result<f64, CriteriaError> {
        let dv = match self.direction {
            TimeDirection::Forward => self.dv_cum.eval(t),
            TimeDirection::Reversed => self.dv_cum.total() - self.dv_cum.eval(t),
        };
        Ok(dv + 0.5 * self.sup_part(t)?)
    }

    /// `R_Gamma(t)` (forward) or `R*_Gamma(t)` (reversed).
    pub fn r_of(&self, t: f64) -> Result<f64, CriteriaError> {
        let m = self.m_of(t)?;
        let a0 = self.a0.eval(t)?;
        let budget = self.gamma_cap + m;
        let mut linear = 0.0;
        for e in &self.bc_plus {
            linear += e.eval(t)?.abs() * budget;
        }
        Ok(a0.abs() * budget * budget + linear)
    }
}

/// `(alpha, beta, alpha', beta')` for `m = 1, 2` at one time.
type EnvelopeValues = ([f64; 2], [f64; 2], [f64; 2], [f64; 2]);

fn envelope_values(env: &EnvelopeQuad, t: f64) -> Result<EnvelopeValues, EvalError> {
    Ok((
        [env.alpha[0].eval(t)?, env.alpha[1].eval(t)?],
        [env.beta[0].eval(t)?, env.beta[1].eval(t)?],
        [env.dalpha[0].eval(t)?, env.dalpha[1].eval(t)?],
        [env.dbeta[0].eval(t)?, env.dbeta[1].eval(t)?],
    ))
}

fn check_sign_pattern(env: &EnvelopeQuad, grid: &[f64]) -> Result<(), CriteriaError> {
    for &t in grid {
        let (alpha, beta, _, _) = envelope_values(env, t)?;
        if !(alpha[0] < 0.0 && beta[0] < 0.0 && alpha[1] > 0.0 && beta[1] > 0.0) {
            return Err(CriteriaError::Precondition(format!(
                "envelope sign pattern violated at t = {t}: need alpha_1, beta_1 < 0 < \
                 alpha_2, beta_2 (got alpha = {alpha:?}, beta = {beta:?})"
            )));
        }
    }
    Ok(())
}

/// Two-sided envelope criterion for a sign-changing leading coefficient on
/// a finite window. Conditions:
/// 1) imaginary leading coefficients vanish;
/// 2) `alpha_1 <= a_0 <= alpha_2` and `beta_1 <= R_Gamma + d_0 <= beta_2`;
/// 3) `b_0+c_0 >= (alpha_m'/alpha_m - beta_m'/beta_m)/2 +
///    2 (-1)^m sqrt(alpha_m beta_m)` for `m = 1, 2`;
/// 4) `b_0+c_0 >= 2 |a_0| R_Gamma`;
/// 5) `b_n+c_n` vanishes wherever `a_0` does, with the bracket-zero ratio
///    bounded on the window.
///
/// Conclusion when it holds: for `gamma_0` in
/// `[-sqrt(beta_2/alpha_2)(t0), sqrt(beta_1/alpha_1)(t0)]` and
/// `|(gamma_1,gamma_2,gamma_3)| <= Gamma`, the solution exists on the
/// whole window with `-sqrt(beta_2/alpha_2) <= q_0 <= sqrt(beta_1/alpha_1)`
/// and `|[q]_v| <= |[q(t0)]_v| + M(t)`.
pub fn check_thm41(
    ps: &ProblemSpec,
    env: &EnvelopeQuad,
    gamma_cap: f64,
    grid: &[f64],
) -> Result<Verdict, CriteriaError> {
    check_sign_pattern(env, grid)?;
    let gd = gamma_data(ps, gamma_cap, TimeDirection::Forward)?;
    let mut scan = ConditionScan::new();
    for &t in grid {
        // 1)
        for n in 1..4 {
            let a_n = ps.a[n].eval(t)?;
            scan.observe(|| "condition 1)".into(), t, -a_n.abs());
        }
        let a0 = ps.a[0].eval(t)?;
        let (alpha, beta, dalpha, dbeta) = envelope_values(env, t)?;
        // 2)
        scan.observe(|| "condition 2)".into(), t, a0 - alpha[0]);
        scan.observe(|| "condition 2)".into(), t, alpha[1] - a0);
        let r = gd.r_of(t)?;
        let rd = r + ps.d[0].eval(t)?;
        scan.observe(|| "condition 2)".into(), t, rd - beta[0]);
        scan.observe(|| "condition 2)".into(), t, beta[1] - rd);
        // 3)
        let b0c0 = ps.b[0].eval(t)? + ps.c[0].eval(t)?;
        for m in 1..=2 {
            let i = m - 1;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let required = 0.5 * (dalpha[i] / alpha[i] - dbeta[i] / beta[i])
                + 2.0 * sign * (alpha[i] * beta[i]).sqrt();
            scan.observe(|| format!("condition 3) m={m}"), t, b0c0 - required);
        }
        // 4)
        scan.observe(|| "condition 4)".into(), t, b0c0 - 2.0 * a0.abs() * r);
        // 5) support condition
        if a0.abs() <= TAU_ZERO {
            for n in 1..4 {
                let bc = ps.b[n].eval(t)? + ps.c[n].eval(t)?;
                scan.observe(|| "condition 5)".into(), t, -bc.abs());
            }
        }
    }
    Ok(scan.into_verdict(
        Criterion::Thm41,
        grid_description(grid),
        CheckParams::Window {
            env: env.clone(),
            gamma_cap,
        },
    ))
}

/// The problem reversed about `lambda0 = t0 + horizon`: coefficients
/// `f(t) -> -f(lambda0 - t)`. Solutions of the reversed problem map to
/// solutions of the original by `q(t) = u(lambda0 - t)` with identical
/// state components, so terminal data for the original is initial data
/// for the reversed problem.
pub fn reversed_problem(ps: &ProblemSpec) -> ProblemSpec {
    let lambda0 = ps.t0 + ps.horizon;
    let refl = reflect_problem(ps, lambda0);
    let neg4 = |arr: &[Expr; 4]| -> [Expr; 4] { arr.clone().map(|e| e.neg().simplify()) };
    let mut out = refl.clone();
    out.a = neg4(&refl.a);
    out.b = neg4(&refl.b);
    out.c = neg4(&refl.c);
    out.d = neg4(&refl.d);
    out
}

/// The reversed envelopes: `alpha~_m(t) = -alpha_{3-m}(lambda0 - t)` and
/// likewise for `beta`; the sign pattern is preserved.
pub fn reversed_envelopes(env: &EnvelopeQuad, lambda0: f64) -> EnvelopeQuad {
    let refl_neg = |e: &Expr| e.reflect_time(lambda0).neg().simplify();
    EnvelopeQuad::new(
        refl_neg(&env.alpha[1]),
        refl_neg(&env.alpha[0]),
        refl_neg(&env.beta[1]),
        refl_neg(&env.beta[0]),
    )
}

fn starred_label(label: &str) -> String {
    // positional mapping: condition n) of the reversed check is condition
    // (n-1)*) of the terminal-value criterion
    if let Some(rest) = label.strip_prefix("condition ") {
        let (num, tail) = rest.split_at(1);
        if let Ok(n) = num.parse::<u32>() {
            if n >= 2 {
                let tail = tail.strip_prefix(')').unwrap_or(tail);
                return format!("condition {}*){}", n - 1, tail);
            }
        }
    }
    label.to_string()
}

/// Terminal-value criterion on a finite window: checks the two-sided
/// envelope criterion on the time-reversed problem with reflected
/// envelopes and the starred growth data.
///
/// Conclusion when it holds: for terminal data `gamma_0` in
/// `[-sqrt(beta_1/alpha_1)(horizon), sqrt(beta_2/alpha_2)(horizon)]` and
/// `|(gamma_1,gamma_2,gamma_3)| <= Gamma`, a solution exists on the whole
/// closed window with `-sqrt(beta_1/alpha_1) <= q_0 <= sqrt(beta_2/alpha_2)`
/// and `|[q(t)]_v| <= |[q(horizon)]_v| + M*(t)`.
pub fn check_cor41(
    ps: &ProblemSpec,
    env: &EnvelopeQuad,
    gamma_cap: f64,
    grid: &[f64],
) -> Result<Verdict, CriteriaError> {
    if !ps.horizon.is_finite() {
        return Err(CriteriaError::Precondition(
            "finite horizon required: tau_0 < infinity".into(),
        ));
    }
    let lambda0 = ps.t0 + ps.horizon;
    let rev_ps = reversed_problem(ps);
    let rev_env = reversed_envelopes(env, lambda0);
    let inner = check_thm41(&rev_ps, &rev_env, gamma_cap, grid)?;
    Ok(Verdict {
        criterion: Criterion::Cor41,
        holds: inner.holds,
        witness_t: inner.witness_t.map(|t| lambda0 - t),
        violated: inner.violated.as_deref().map(starred_label),
        margin: inner.margin,
        grid: inner.grid,
        borderline: inner.borderline,
        params: CheckParams::Window {
            env: env.clone(),
            gamma_cap,
        },
    })
}

/// Consistency helper used by tests and diagnostics: the forward data of
/// the reversed problem evaluated at `lambda0 - t` must agree with the
/// starred data of the original at `t`.
pub fn starred_vs_reversed_residual(
    ps: &ProblemSpec,
    gamma_cap: f64,
    samples: usize,
) -> Result<f64, CriteriaError> {
    let lambda0 = ps.t0 + ps.horizon;
    let starred = gamma_data(ps, gamma_cap, TimeDirection::Reversed)?;
    let rev = gamma_data(&reversed_problem(ps), gamma_cap, TimeDirection::Forward)?;
    let mut worst: f64 = 0.0;
    for &t in &uniform_grid(ps.t0, ps.horizon, samples) {
        let m_star = starred.m_of(t)?;
        let m_rev = rev.m_of(lambda0 - t)?;
        worst = worst.max((m_star - m_rev).abs());
        let r_star = starred.r_of(t)?;
        let r_rev = rev.r_of(lambda0 - t)?;
        worst = worst.max((r_star - r_rev).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn sin_family() -> (ProblemSpec, EnvelopeQuad) {
        // a_0 = sin t, b_0 = c_0 = 1.1, d_0 = -0.02, rest zero, window [0, 10]
        let mut ps = ProblemSpec::zero_on(0.0, 10.0);
        ps.a[0] = parse_expr("sin(t)").unwrap();
        ps.b[0] = Expr::Num(1.1);
        ps.c[0] = Expr::Num(1.1);
        ps.d[0] = Expr::Num(-0.02);
        let env = EnvelopeQuad::new(
            Expr::Num(-1.1),
            Expr::Num(1.1),
            Expr::Num(-1.0),
            Expr::Num(1.0),
        );
        (ps, env)
    }

    #[test]
    fn gamma_data_trivial_family() {
        // d_v = 0 and b_n + c_n = 0 (n >= 1): M = 0 and R = |a_0| Gamma^2
        let (ps, _) = sin_family();
        let gd = gamma_data(&ps, 0.1, TimeDirection::Forward).unwrap();
        for &t in &[0.0, 1.0, 5.0, 10.0] {
            assert!(gd.m_of(t).unwrap().abs() < 1e-13);
            let expect = t.sin().abs() * 0.01;
            assert!((gd.r_of(t).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_data_ratio_one_on_support() {
        // a_0 = sin t with b_1 + c_1 = sin t: bracket0 = sign(sin t), and
        // the running sup reaches 1 as soon as the support is entered
        let mut ps = ProblemSpec::zero_on(0.0, 10.0);
        ps.a[0] = parse_expr("sin(t)").unwrap();
        ps.b[1] = parse_expr("sin(t)").unwrap();
        ps.d[1] = Expr::Num(1.0); // |d_v| = 1
        let gd = gamma_data(&ps, 1.0, TimeDirection::Forward).unwrap();
        let m5 = gd.m_of(5.0).unwrap();
        assert!((m5 - (5.0 + 0.5)).abs() < 1e-9, "M(5) = {m5}");
    }

    #[test]
    fn bracket0_convention_at_zero_leading_coeff() {
        let mut ps = ProblemSpec::zero_on(0.0, 1.0);
        ps.b[1] = Expr::Num(1.0);
        let gd = gamma_data(&ps, 1.0, TimeDirection::Forward).unwrap();
        assert_eq!(gd.bracket0(0.5).unwrap(), 0.0);
    }

    #[test]
    fn unbounded_bracket0_is_detected() {
        // a_0 just above the zero threshold with b_1 + c_1 = 2: the ratio
        // exceeds the boundedness guard
        let mut ps = ProblemSpec::zero_on(0.0, 1.0);
        ps.a[0] = Expr::Num(1.5e-12);
        ps.b[1] = Expr::Num(2.0);
        assert!(matches!(
            gamma_data(&ps, 1.0, TimeDirection::Forward),
            Err(CriteriaError::Bracket0Unbounded { .. })
        ));
    }

    #[test]
    fn thm41_worked_family_holds() {
        let (ps, env) = sin_family();
        let grid = uniform_grid(0.0, 10.0, 2049);
        let v = check_thm41(&ps, &env, 0.1, &grid).unwrap();
        assert!(v.holds, "violated: {:?} at {:?}", v.violated, v.witness_t);
    }

    #[test]
    fn thm41_falsification_names_condition_3() {
        let (mut ps, env) = sin_family();
        ps.b[0] = Expr::Num(1.0);
        ps.c[0] = Expr::Num(1.0);
        let grid = uniform_grid(0.0, 10.0, 2049);
        let v = check_thm41(&ps, &env, 0.1, &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("condition 3) m=2"));
    }

    #[test]
    fn thm41_support_condition_failure() {
        let (mut ps, env) = sin_family();
        ps.b[1] = Expr::Num(1.0); // b_1 + c_1 = 1 != 0 where sin t = 0
        let grid = uniform_grid(0.0, 10.0, 2049);
        // the grid must contain a zero of sin within TAU_ZERO; t = 0 works
        let v = check_thm41(&ps, &env, 0.1, &grid).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violated.as_deref(), Some("condition 5)"));
    }

    #[test]
    fn thm41_sign_pattern_is_a_precondition() {
        let (ps, _) = sin_family();
        let bad = EnvelopeQuad::new(
            Expr::Num(1.1), // should be negative
            Expr::Num(1.1),
            Expr::Num(-1.0),
            Expr::Num(1.0),
        );
        let grid = uniform_grid(0.0, 10.0, 65);
        assert!(matches!(
            check_thm41(&ps, &bad, 0.1, &grid),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn cor41_requires_finite_horizon() {
        let (mut ps, env) = sin_family();
        ps.horizon = f64::INFINITY;
        let grid = uniform_grid(0.0, 10.0, 65);
        assert!(matches!(
            check_cor41(&ps, &env, 0.1, &grid),
            Err(CriteriaError::Precondition(_))
        ));
    }

    #[test]
    fn cor41_on_sign_flipped_family_holds() {
        // negating b_0, c_0 makes the reversed problem satisfy the
        // forward criterion
        let (mut ps, env) = sin_family();
        ps.b[0] = Expr::Num(-1.1);
        ps.c[0] = Expr::Num(-1.1);
        let grid = uniform_grid(0.0, 10.0, 2049);
        let v = check_cor41(&ps, &env, 0.1, &grid).unwrap();
        assert!(v.holds, "violated: {:?} at {:?}", v.violated, v.witness_t);

        // and the original positive family fails the starred condition 3*)
        let (ps, env) = sin_family();
        let v = check_cor41(&ps, &env, 0.1, &grid).unwrap();
        assert!(!v.holds);
        let label = v.violated.unwrap();
        assert!(label.contains('*'), "label: {label}");
    }

    #[test]
    fn starred_data_equals_reversed_forward_data() {
        // nontrivial |d_v| part; vanishing bracket part (the signed
        // bracket ratio does not commute with reversal when it changes
        // sign, so the clean identity needs b_n + c_n = 0 for n >= 1)
        let mut ps = ProblemSpec::zero_on(0.0, 10.0);
        ps.a[0] = parse_expr("sin(t)").unwrap();
        ps.d[1] = parse_expr("cos(t) ^ 2").unwrap();
        ps.d[3] = parse_expr("0.25 * t").unwrap();
        let worst = starred_vs_reversed_residual(&ps, 0.3, 257).unwrap();
        assert!(worst <= 1e-8, "residual {worst}");
    }
}
