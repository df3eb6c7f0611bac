//! Adaptive explicit Runge-Kutta initial-value solver with dense output,
//! finite-escape-time (blow-up) detection, sign-crossing events, and the
//! trace diagnostic that flags approaching blow-up.
//!
//! The stepper is the Dormand-Prince 5(4) pair with PI step-size control.
//! Each accepted step is split into thirds (interior values from the
//! fifth-order interpolant) before storage, so the trajectory's piecewise
//! cubic Hermite dense output stays within an order of magnitude of the
//! local error tolerance.

use thiserror::Error;

use crate::expr::config::{NumericOverrides, ProblemSpec};
use crate::expr::EvalError;

/// Tolerances and guards for one integration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericPolicy {
    pub rtol: f64,
    pub atol: f64,
    /// Cap on the step size; infinite means "whole window".
    pub max_step: f64,
    /// Smallest admissible step; `None` resolves to `1e-12 * (t_end - t0)`.
    pub min_step: Option<f64>,
    /// Euclidean state norm at which the run terminates as escaped.
    pub blowup_norm: f64,
    pub max_steps: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
            min_step: None,
            blowup_norm: 1e8,
            max_steps: 10_000_000,
        }
    }
}

impl NumericPolicy {
    /// Default policy with the `[numeric]` overrides of a configuration
    /// applied.
    pub fn with_overrides(o: &NumericOverrides) -> Self {
        let mut p = NumericPolicy::default();
        if let Some(v) = o.rtol {
            p.rtol = v;
        }
        if let Some(v) = o.atol {
            p.atol = v;
        }
        if let Some(v) = o.max_step {
            p.max_step = v;
        }
        if let Some(v) = o.blowup_norm {
            p.blowup_norm = v;
        }
        p
    }

    pub fn tighter(mut self, factor: f64) -> Self {
        self.rtol /= factor;
        self.atol /= factor;
        self
    }
}

/// Terminal state of an integration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Status {
    /// Reached `t_end`.
    Completed,
    /// State norm reached the blow-up threshold at the recorded time.
    Escaped { t_escape: f64 },
    /// Step-size controller demanded a step below the minimum.
    StepCollapse { t: f64 },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::Escaped { .. } => "escaped",
            Status::StepCollapse { .. } => "step_collapse",
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, Status::Completed)
    }
}

/// Integration failure (terminal statuses are not errors).
#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("right-hand side evaluation failed: {0}")]
    Rhs(#[from] EvalError),
    #[error("maximum step count exceeded at t = {t}")]
    MaxSteps { t: f64 },
    #[error("integration window is empty: t_end = {t_end} <= t0 = {t0}")]
    BadWindow { t0: f64, t_end: f64 },
    #[error("initial state or derivative is not finite at t0 = {t0}")]
    NonFiniteInitial { t0: f64 },
}

/// Dense time-stamped solution of an initial-value problem.
///
/// Node times are strictly increasing and start at `t0`. Between nodes the
/// solution is the cubic Hermite interpolant through the stored states and
/// derivatives; at nodes `dense` reproduces the stored state exactly.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub status: Status,
    dim: usize,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn segment_index(&self, t: f64) -> usize {
        // last i with times[i] <= t, capped so i+1 is valid
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.times.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.times.len() - 2),
        }
    }

    /// Cubic Hermite dense output, clamped to the recorded window.
    pub fn dense(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.dense_into(t, &mut out);
        out
    }

    pub fn dense_into(&self, t: f64, out: &mut [f64]) {
        if self.times.len() == 1 {
            out.copy_from_slice(&self.states[0]);
            return;
        }
        let t = t.clamp(self.t0(), self.end_time());
        let i = self.segment_index(t);
        let (t_a, t_b) = (self.times[i], self.times[i + 1]);
        if t == t_a {
            out.copy_from_slice(&self.states[i]);
            return;
        }
        if t == t_b {
            out.copy_from_slice(&self.states[i + 1]);
            return;
        }
        let h = t_b - t_a;
        let s = (t - t_a) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (ya, yb) = (&self.states[i], &self.states[i + 1]);
        let (fa, fb) = (&self.derivs[i], &self.derivs[i + 1]);
        for c in 0..self.dim {
            out[c] = h00 * ya[c] + h10 * h * fa[c] + h01 * yb[c] + h11 * h * fb[c];
        }
    }

    /// One dense component at time `t`.
    pub fn dense_component(&self, t: f64, component: usize) -> f64 {
        self.dense(t)[component]
    }

    /// `n` evenly spaced sample times covering the recorded window.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let (a, b) = (self.t0(), self.end_time());
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order solution weights are row 7 of A (FSAL); these are the
// differences to the embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Fifth-order dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK_MAX: f64 = 10.0; // h may shrink by at most this factor
const FAC_GROW_MAX: f64 = 5.0; // h may grow by at most this factor

/// Integrates `y' = rhs(t, y)` from `(t0, y0)` to `t_end` with the embedded
/// RK5(4) pair and PI step control.
///
/// Local error per step is held below `atol + rtol * |y|` componentwise (in
/// the RMS sense). The run terminates early with [`Status::Escaped`] when
/// the state norm reaches `policy.blowup_norm` (the escape time is refined
/// by bisection on the dense output of the final step), or with
/// [`Status::StepCollapse`] when the controller demands a step below the
/// minimum.
pub fn integrate_ivp<F>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    policy: &NumericPolicy,
) -> Result<Trajectory, IntegrateError>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    if !(t_end > t0) {
        return Err(IntegrateError::BadWindow { t0, t_end });
    }
    let dim = y0.len();
    let span = t_end - t0;
    let min_step = policy.min_step.unwrap_or(1e-12 * span);
    let max_step = policy.max_step.min(span);

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut y = y0.to_vec();
    let mut t = t0;

    if y.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFiniteInitial { t0 });
    }
    rhs(t, &y, &mut k[0])?;
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFiniteInitial { t0 });
    }

    let mut traj = Trajectory {
        times: vec![t],
        states: vec![y.clone()],
        derivs: vec![k[0].clone()],
        status: Status::Completed,
        dim,
    };

    let mut h = initial_step(&rhs, t, &y, &k[0], policy, max_step)?.max(min_step);
    let mut facold: f64 = 1e-4;
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut steps = 0usize;

    loop {
        if t >= t_end {
            traj.status = Status::Completed;
            return Ok(traj);
        }
        if steps >= policy.max_steps {
            return Err(IntegrateError::MaxSteps { t });
        }
        steps += 1;

        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
        }

        // stages 2..7 (k[0] is FSAL from the previous step)
        for s in 1..7 {
            for c in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[c];
                }
                ytmp[c] = y[c] + h * acc;
            }
            rhs(t + C[s] * h, &ytmp, &mut k[s])?;
        }
        // stage 7 input is the 5th-order solution
        ynew.copy_from_slice(&ytmp);

        // scaled RMS error norm
        let mut err_sq = 0.0;
        for c in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[c];
            }
            e *= h;
            let sc = policy.atol + policy.rtol * y[c].abs().max(ynew[c].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let mut err = (err_sq / dim as f64).sqrt();
        if !err.is_finite() {
            err = 2.0; // force a rejection and shrink
        }

        if err <= 1.0 {
            // accept
            let t_new = t + h;

            // interior points via the 5th-order interpolant, plus one
            // derivative evaluation each, so storage is three short
            // Hermite segments per accepted step
            for theta in [1.0 / 3.0, 2.0 / 3.0] {
                let t_sub = t + theta * h;
                if t_sub > *traj.times.last().unwrap() && t_sub < t_new {
                    let mut ysub = vec![0.0; dim];
                    dense_theta(&y, &ynew, &k, h, theta, &mut ysub);
                    let mut fsub = vec![0.0; dim];
                    rhs(t_sub, &ysub, &mut fsub)?;
                    traj.times.push(t_sub);
                    traj.states.push(ysub);
                    traj.derivs.push(fsub);
                }
            }
            traj.times.push(t_new);
            traj.states.push(ynew.clone());
            traj.derivs.push(k[6].clone());

            y.copy_from_slice(&ynew);
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]); // FSAL
            let t_start = t;
            t = t_new;

            if euclid_norm(&y) >= policy.blowup_norm {
                let t_escape = refine_escape(&traj, policy.blowup_norm, t_start);
                truncate_at(&mut traj, t_escape, &rhs)?;
                traj.status = Status::Escaped { t_escape };
                return Ok(traj);
            }

            if last {
                traj.status = Status::Completed;
                return Ok(traj);
            }

            let fac11 = err.powf(EXPO1);
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_GROW_MAX, FAC_SHRINK_MAX);
            facold = err.max(1e-4);
            h = (h / fac).min(max_step);
        } else {
            // reject
            let fac11 = err.powf(EXPO1);
            h /= (fac11 / SAFE).min(FAC_SHRINK_MAX);
        }

        if h < min_step {
            traj.status = Status::StepCollapse { t };
            return Ok(traj);
        }
    }
}

/// Fifth-order dense evaluation at fraction `theta` of the step.
fn dense_theta(y: &[f64], ynew: &[f64], k: &[Vec<f64>], h: f64, theta: f64, out: &mut [f64]) {
    let theta1 = 1.0 - theta;
    for c in 0..y.len() {
        let ydiff = ynew[c] - y[c];
        let bspl = h * k[0][c] - ydiff;
        let mut cont4 = 0.0;
        for (j, kj) in k.iter().enumerate() {
            cont4 += D[j] * kj[c];
        }
        cont4 *= h;
        let cont3 = ydiff - h * k[6][c] - bspl;
        out[c] = y[c] + theta * (ydiff + theta1 * (bspl + theta * (cont3 + theta1 * cont4)));
    }
}

fn initial_step<F>(
    rhs: &F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    policy: &NumericPolicy,
    max_step: f64,
) -> Result<f64, IntegrateError>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    let dim = y0.len();
    let sc: Vec<f64> = (0..dim)
        .map(|c| policy.atol + policy.rtol * y0[c].abs())
        .collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter()
            .zip(&sc)
            .map(|(x, s)| (x / s) * (x / s))
            .sum::<f64>()
            / dim as f64)
            .sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(max_step);

    let y1: Vec<f64> = (0..dim).map(|c| y0[c] + h0 * f0[c]).collect();
    let mut f1 = vec![0.0; dim];
    rhs(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = (0..dim).map(|c| f1[c] - f0[c]).collect();
    let d2 = rms(&diff) / h0;

    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    Ok(h1.min(100.0 * h0).min(max_step))
}

/// Earliest time in the final recorded step at which the dense norm
/// reaches the threshold, located by bisection.
fn refine_escape(traj: &Trajectory, threshold: f64, step_start: f64) -> f64 {
    let mut lo = step_start;
    let mut hi = traj.end_time();
    if euclid_norm(&traj.dense(lo)) >= threshold {
        return lo;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if euclid_norm(&traj.dense(mid)) >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn truncate_at<F>(traj: &mut Trajectory, t_cut: f64, rhs: &F) -> Result<(), IntegrateError>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    if t_cut >= traj.end_time() {
        return Ok(());
    }
    let y_cut = traj.dense(t_cut);
    let mut keep = traj.times.len();
    while keep > 1 && traj.times[keep - 1] > t_cut {
        keep -= 1;
    }
    traj.times.truncate(keep);
    traj.states.truncate(keep);
    traj.derivs.truncate(keep);
    if traj.end_time() < t_cut {
        let mut f_cut = vec![0.0; traj.dim];
        rhs(t_cut, &y_cut, &mut f_cut)?;
        traj.times.push(t_cut);
        traj.states.push(y_cut);
        traj.derivs.push(f_cut);
    }
    Ok(())
}

/// Times at which the dense interpolant of one state component changes
/// sign, refined by bisection to 1e-10 time accuracy. Samples that merely
/// touch zero without a sign change are not crossings.
pub fn detect_sign_crossings(traj: &Trajectory, component: usize) -> Vec<f64> {
    assert!(component < traj.dim(), "component out of range");
    const SUBSAMPLES: usize = 8;
    let mut crossings: Vec<f64> = Vec::new();
    let mut push = |t: f64| {
        if crossings.last().is_none_or(|&last| t - last > 1e-9) {
            crossings.push(t);
        }
    };
    let bisect = |mut lo: f64, mut v_lo: f64, mut hi: f64| -> f64 {
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            let v_mid = traj.dense_component(mid, component);
            if v_mid == 0.0 {
                return mid;
            }
            if v_lo * v_mid < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                v_lo = v_mid;
            }
        }
        0.5 * (lo + hi)
    };

    // sign of the last nonzero sample, the location of a pending exact
    // zero, and the last nonzero sample as a bisection bracket
    let mut last_sign = 0.0_f64;
    let mut pending_zero: Option<f64> = None;
    let mut last_nonzero: Option<(f64, f64)> = None;
    let mut handle = |t: f64, v: f64| {
        if v == 0.0 {
            pending_zero.get_or_insert(t);
            return;
        }
        if last_sign == 0.0 {
            last_sign = v.signum();
        } else if v.signum() != last_sign {
            match (pending_zero, last_nonzero) {
                // the interpolant hit zero exactly on a sample
                (Some(zt), _) => push(zt),
                (None, Some((bt, bv))) => push(bisect(bt, bv, t)),
                (None, None) => push(t),
            }
            last_sign = v.signum();
        }
        pending_zero = None;
        last_nonzero = Some((t, v));
    };

    handle(traj.times[0], traj.states[0][component]);
    for i in 0..traj.times.len().saturating_sub(1) {
        let (t_a, t_b) = (traj.times[i], traj.times[i + 1]);
        for s in 1..=SUBSAMPLES {
            let t_s = t_a + (t_b - t_a) * s as f64 / SUBSAMPLES as f64;
            let v_s = if s == SUBSAMPLES {
                traj.states[i + 1][component]
            } else {
                traj.dense_component(t_s, component)
            };
            handle(t_s, v_s);
        }
    }
    crossings
}

/// The diagnostic `f_0(t) = integral of sum_n a_n(tau) q_n(tau)` along a
/// trajectory of the real 4-component system, plus its minimum.
///
/// Boundedness from below of this quantity rules out a finite escape time,
/// so a strongly negative minimum flags an approaching blow-up.
pub fn f0_diagnostic(
    ps: &ProblemSpec,
    traj: &Trajectory,
) -> Result<(Vec<(f64, f64)>, f64), EvalError> {
    assert_eq!(traj.dim(), 4, "expected a trajectory of the real system");
    let integrand = |t: f64, q: &[f64]| -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (a_n, q_n) in ps.a.iter().zip(q) {
            acc += a_n.eval(t)? * q_n;
        }
        Ok(acc)
    };
    let mut series = Vec::with_capacity(traj.times.len());
    let mut f0 = 0.0;
    let mut lower = 0.0_f64;
    series.push((traj.t0(), 0.0));
    for i in 0..traj.times.len() - 1 {
        let (t_a, t_b) = (traj.times[i], traj.times[i + 1]);
        let h = t_b - t_a;
        let t_m = 0.5 * (t_a + t_b);
        let u_a = integrand(t_a, &traj.states[i])?;
        let u_m = integrand(t_m, &traj.dense(t_m))?;
        let u_b = integrand(t_b, &traj.states[i + 1])?;
        f0 += h / 6.0 * (u_a + 4.0 * u_m + u_b);
        lower = lower.min(f0);
        series.push((t_b, f0));
    }
    Ok((series, lower))
}
