//! Non-conjugation harness for the associated linear system: integrates
//! `phi' = C phi + A psi`, `psi' = -D phi - B psi` with the coupled
//! initial data `psi(t0) = (gamma_0 E - gamma_1 I - gamma_2 J - gamma_3 K)
//! phi(t0)` and reports the minimum norms of both solution vectors, the
//! Liouville determinant residual, and the drift of the substitution
//! invariant `psi - Y_1 phi`.
//!
//! A solution pair satisfies the completely-non-conjugation condition when
//! neither vector hits zero; a norm dipping below the floor produces a
//! counterexample report rather than an error, since near-zero minima
//! deserve inspection.

use thiserror::Error;

use crate::criteria::{check_thm31, check_thm32, default_grid, CriteriaError};
use crate::expr::config::ProblemSpec;
use crate::expr::EvalError;
use crate::integrate::{integrate_ivp, IntegrateError, NumericPolicy, Status, Trajectory};
use crate::model::{linear_system_rhs, real_rhs, symbols_at, CumulativeIntegral, QuadError};
use crate::quat::{Mat4, Quaternion};
use crate::tol::NONCONJ_NORM_FLOOR;

/// Which criterion's hypothesis set couples the initial data: the
/// componentwise branch requires `gamma_n >= 0` on `S` with a nonzero sum,
/// the fiver branch requires all `gamma_n > 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum NonconjMode {
    Thm31 { s_set: Vec<usize> },
    Thm32 { eps: f64 },
}

/// Input of a harness run. The window end is the problem horizon; `psi`'s
/// initial value is always derived from `gamma` and `phi0`, never supplied
/// directly.
#[derive(Clone, Debug)]
pub struct NonconjInput {
    pub ps: ProblemSpec,
    pub phi0: [f64; 4],
    pub mode: NonconjMode,
    /// Re-run the underlying criterion check before integrating.
    pub recheck: bool,
}

/// Harness outcome for a completed integration.
#[derive(Clone, Debug)]
pub struct NonconjReport {
    pub min_phi_norm: f64,
    pub argmin_phi_t: f64,
    pub min_psi_norm: f64,
    pub argmin_psi_t: f64,
    pub liouville_residual: f64,
    /// Worst `|psi - Y_1 phi| / max(1, |psi|)` over the window.
    pub substitution_drift: f64,
    pub status: Status,
    /// Both norms stayed at or above the floor.
    pub nonconjugate: bool,
    /// `(t, norm)` of the first norm dip below the floor, if any.
    pub counterexample: Option<(f64, f64)>,
}

impl NonconjReport {
    /// Line-oriented `key = value` report with stable key order.
    pub fn to_report_lines(&self) -> Vec<String> {
        use crate::criteria::format_float as ff;
        let mut lines = vec![
            format!("min_phi_norm = {}", ff(self.min_phi_norm)),
            format!("argmin_phi_t = {}", ff(self.argmin_phi_t)),
            format!("min_psi_norm = {}", ff(self.min_psi_norm)),
            format!("argmin_psi_t = {}", ff(self.argmin_psi_t)),
            format!("liouville_residual = {}", ff(self.liouville_residual)),
            format!("substitution_drift = {}", ff(self.substitution_drift)),
            format!("status = {}", self.status.label()),
            format!("nonconjugate = {}", self.nonconjugate),
        ];
        if let Some((t, norm)) = self.counterexample {
            lines.push(format!("counterexample_t = {}", ff(t)));
            lines.push(format!("counterexample_norm = {}", ff(norm)));
        }
        lines
    }
}

#[derive(Debug, Error)]
pub enum NonconjError {
    #[error("phi(t0) must be a nonzero vector")]
    ZeroPhi0,
    #[error("initial data violates the mode's constraint: {0}")]
    GammaConstraint(String),
    #[error("criterion re-check failed: {violated}")]
    CriterionFailed { violated: String },
    #[error("linear-system integration did not complete (status {status})")]
    Incomplete { status: &'static str },
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn norm4(v: &[f64]) -> f64 {
    v.iter().take(4).map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimum of the Euclidean norm of components `[offset, offset+4)` over
/// the dense trajectory: segment sampling plus golden-section refinement
/// around the best sample.
fn min_norm(traj: &Trajectory, offset: usize) -> (f64, f64) {
    let norm_at = |t: f64| -> f64 {
        let s = traj.dense(t);
        norm4(&s[offset..offset + 4])
    };
    let mut best = (f64::INFINITY, traj.t0());
    for i in 0..traj.times.len() {
        let v = norm4(&traj.states[i][offset..offset + 4]);
        if v < best.0 {
            best = (v, traj.times[i]);
        }
        if i + 1 < traj.times.len() {
            let (a, b) = (traj.times[i], traj.times[i + 1]);
            for s in 1..8 {
                let t = a + (b - a) * s as f64 / 8.0;
                let v = norm_at(t);
                if v < best.0 {
                    best = (v, t);
                }
            }
        }
    }
    // local refinement on the bracketing window
    let span = traj.end_time() - traj.t0();
    let mut lo = (best.1 - span / 64.0).max(traj.t0());
    let mut hi = (best.1 + span / 64.0).min(traj.end_time());
    const PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let m1 = hi - PHI * (hi - lo);
        let m2 = lo + PHI * (hi - lo);
        if norm_at(m1) <= norm_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t_ref = 0.5 * (lo + hi);
    let v_ref = norm_at(t_ref);
    if v_ref < best.0 {
        (v_ref, t_ref)
    } else {
        best
    }
}

/// Lifts the finite-escape guard: linear flows cannot blow up in finite
/// time, so only f64 overflow needs protection.
fn linear_policy(policy: &NumericPolicy) -> NumericPolicy {
    NumericPolicy {
        blowup_norm: policy.blowup_norm.max(1e100),
        ..*policy
    }
}

/// Runs the harness: derives `psi(t0)` from `gamma` and `phi(t0)`,
/// integrates the linear system over the problem window, and reports the
/// minimum norms together with the Liouville residual and the
/// substitution drift.
pub fn run_nonconj(
    input: &NonconjInput,
    policy: &NumericPolicy,
) -> Result<NonconjReport, NonconjError> {
    let ps = &input.ps;
    if norm4(&input.phi0) == 0.0 {
        return Err(NonconjError::ZeroPhi0);
    }
    match &input.mode {
        NonconjMode::Thm31 { s_set } => {
            let mut sum = 0.0;
            for &n in s_set {
                if ps.gamma[n] < 0.0 {
                    return Err(NonconjError::GammaConstraint(format!(
                        "gamma_{n} >= 0 required on the active set"
                    )));
                }
                sum += ps.gamma[n];
            }
            if sum == 0.0 {
                return Err(NonconjError::GammaConstraint(
                    "sum of gamma_n over the active set must be nonzero".into(),
                ));
            }
        }
        NonconjMode::Thm32 { .. } => {
            for (n, g) in ps.gamma.iter().enumerate() {
                if !(*g > 0.0) {
                    return Err(NonconjError::GammaConstraint(format!(
                        "gamma_{n} > 0 required"
                    )));
                }
            }
        }
    }
    if input.recheck {
        let grid = default_grid(ps);
        let verdict = match &input.mode {
            NonconjMode::Thm31 { s_set } => check_thm31(ps, s_set, &grid)?,
            NonconjMode::Thm32 { eps } => check_thm32(ps, *eps, &grid, false)?,
        };
        if !verdict.holds {
            return Err(NonconjError::CriterionFailed {
                violated: verdict.violated.unwrap_or_else(|| "unknown".into()),
            });
        }
    }

    // psi(t0) = (gamma_0 E - gamma_1 I - gamma_2 J - gamma_3 K) phi(t0)
    let coupling = Quaternion::from_state(ps.gamma).symbol();
    let psi0 = coupling.apply(input.phi0);

    let mut state0 = [0.0; 8];
    state0[..4].copy_from_slice(&input.phi0);
    state0[4..].copy_from_slice(&psi0);
    let lin_policy = linear_policy(policy);
    let pair = integrate_ivp(
        linear_system_rhs(ps, 1),
        &state0,
        ps.t0,
        ps.horizon,
        &lin_policy,
    )?;
    if !pair.status.is_completed() {
        return Err(NonconjError::Incomplete {
            status: pair.status.label(),
        });
    }

    let (min_phi_norm, argmin_phi_t) = min_norm(&pair, 0);
    let (min_psi_norm, argmin_psi_t) = min_norm(&pair, 4);

    // the solution of the Riccati system supplies Y_1 for the Liouville
    // identity and the substitution invariant
    let q_traj = integrate_ivp(real_rhs(ps), &ps.gamma, ps.t0, ps.horizon, policy)?;
    if !q_traj.status.is_completed() {
        return Err(NonconjError::Incomplete {
            status: q_traj.status.label(),
        });
    }
    let liouville_residual = liouville_check(ps, &q_traj, policy)?;

    // drift of psi - Y_1 phi, scaled by the solution size so the measure
    // stays meaningful for exponentially growing pairs
    let mut substitution_drift: f64 = 0.0;
    for &t in &pair.sample_times(1001) {
        let s = pair.dense(t);
        let y1 = Quaternion::from_state(q_traj.dense(t).as_slice().try_into().unwrap()).symbol();
        let predicted = y1.apply(s[..4].try_into().unwrap());
        let drift: f64 = (0..4)
            .map(|i| (s[4 + i] - predicted[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        substitution_drift = substitution_drift.max(drift / norm4(&s[4..]).max(1.0));
    }

    let mut counterexample = None;
    for (norm, t) in [(min_phi_norm, argmin_phi_t), (min_psi_norm, argmin_psi_t)] {
        if norm < NONCONJ_NORM_FLOOR && counterexample.is_none() {
            counterexample = Some((t, norm));
        }
    }

    Ok(NonconjReport {
        min_phi_norm,
        argmin_phi_t,
        min_psi_norm,
        argmin_psi_t,
        liouville_residual,
        substitution_drift,
        status: pair.status,
        nonconjugate: counterexample.is_none(),
        counterexample,
    })
}

/// Integrates the fundamental-matrix flow `Phi' = [A(t) Y_1(t) + C(t)]
/// Phi` with `Phi(t0) = E` along a completed trajectory of the real
/// system and returns the worst relative deviation of `det Phi(t)` from
/// `exp(integral tr[A Y_1 + C])`.
pub fn liouville_check(
    ps: &ProblemSpec,
    q_traj: &Trajectory,
    policy: &NumericPolicy,
) -> Result<f64, NonconjError> {
    assert_eq!(q_traj.dim(), 4, "expected a trajectory of the real system");
    let t0 = q_traj.t0();
    let t_end = q_traj.end_time();

    let flow_rhs = |t: f64, state: &[f64], dstate: &mut [f64]| -> Result<(), EvalError> {
        let [a, _, c, _] = symbols_at(ps, t)?;
        let y1 = Quaternion::from_state(q_traj.dense(t).as_slice().try_into().unwrap()).symbol();
        let m = a.matmul(&y1).add(&c);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for (k, row) in m.0[i].iter().enumerate() {
                    acc += row * state[4 * k + j];
                }
                dstate[4 * i + j] = acc;
            }
        }
        Ok(())
    };
    let mut e0 = [0.0; 16];
    for i in 0..4 {
        e0[4 * i + i] = 1.0;
    }
    let tight = linear_policy(policy).tighter(100.0);
    let flow = integrate_ivp(flow_rhs, &e0, t0, t_end, &tight)?;
    if !flow.status.is_completed() {
        return Err(NonconjError::Incomplete {
            status: flow.status.label(),
        });
    }

    // trace integral on the same dense data
    let trace_cum = CumulativeIntegral::build(
        |t| {
            let q = q_traj.dense(t);
            let mut acc = ps.c[0].eval(t)?;
            for (a_n, q_n) in ps.a.iter().zip(&q) {
                acc += a_n.eval(t)? * q_n;
            }
            Ok(4.0 * acc)
        },
        t0,
        t_end,
    )?;

    let mut residual: f64 = 0.0;
    for &t in &flow.sample_times(1001) {
        let s = flow.dense(t);
        let mut m = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = s[4 * i + j];
            }
        }
        let det = m.det();
        let expected =
            crate::model::quad::guarded_exp(trace_cum.eval(t), t).map_err(NonconjError::Quad)?;
        residual = residual.max((det - expected).abs() / expected.max(1.0));
    }
    Ok(residual)
}
