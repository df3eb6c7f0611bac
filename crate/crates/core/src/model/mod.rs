//! Right-hand sides and derived quantities of the quaternionic Riccati
//! model: the real 4-component system, the 4x4 matrix Riccati equation,
//! the associated linear systems, the derived coefficients `p_{n,m}` and
//! `D_n`, the fivers, the quadratic form `W`, the coefficient
//! transformations, and the weighted exponential quadrature.

pub mod quad;

use thiserror::Error;

use crate::expr::config::ProblemSpec;
use crate::expr::{EvalError, Expr};
use crate::quat::{Mat4, Quaternion};
use crate::tol::TAU_ZERO;

pub use quad::{quad_igh, CumulativeIntegral, IghEvaluator, QuadError};

/// Unit imaginary quaternion used by the left-multiplication transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitImaginary {
    I,
    J,
    K,
}

impl UnitImaginary {
    pub fn quaternion(self) -> Quaternion {
        match self {
            UnitImaginary::I => Quaternion::I,
            UnitImaginary::J => Quaternion::J,
            UnitImaginary::K => Quaternion::K,
        }
    }
}

/// Sign-normalization substitutions of the solution variable: `q -> -q`,
/// `q -> conj(q)`, and `q -> u p` for a unit imaginary `u`. Combinations
/// are formed by composing transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffTransform {
    Negate,
    Conjugate,
    LeftUnit(UnitImaginary),
}

/// The quadratic form `W(x,y,z) = p[(x + q/2p)^2 + (y + r/2p)^2 +
/// (z + s/2p)^2] - l/(4p)` is undefined for `p = 0`.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("fiver has p = 0: the quadratic form W is undefined")]
pub struct ZeroPError;

/// Ordered five-tuple `(p, q, r, s, l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fiver {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub l: f64,
}

/// Outcome of the eps-semi-definite-positivity test, with the decisive
/// branch or violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiverCheck {
    pub ok: bool,
    pub reason: &'static str,
}

/// Tests whether a fiver is eps-semi-definite-positive:
/// `p > 0`, `l > 0`, and either `max{q,r,s} >= sqrt(l+eps)` or
/// `0 <= min{q,r,s} <= max{q,r,s} <= sqrt(l+eps)` with
/// `q^2 + r^2 + s^2 >= l + eps`.
pub fn check_fiver_eps(f: &Fiver, eps: f64) -> FiverCheck {
    check_fiver_eps_mode(f, eps, false)
}

/// [`check_fiver_eps`] with a literal-text mode: when `literal_ls` is set
/// the final inequality reads `q^2 + r^2 + s^2 >= l + s` instead of
/// `l + eps`.
pub fn check_fiver_eps_mode(f: &Fiver, eps: f64, literal_ls: bool) -> FiverCheck {
    if !(f.p > 0.0) {
        return FiverCheck {
            ok: false,
            reason: "p > 0 fails",
        };
    }
    if !(f.l > 0.0) {
        return FiverCheck {
            ok: false,
            reason: "l > 0 fails",
        };
    }
    let bound = (f.l + eps).sqrt();
    let max = f.q.max(f.r).max(f.s);
    let min = f.q.min(f.r).min(f.s);
    if max >= bound {
        return FiverCheck {
            ok: true,
            reason: "max{q,r,s} >= sqrt(l+eps)",
        };
    }
    let sum_sq = f.q * f.q + f.r * f.r + f.s * f.s;
    let floor = if literal_ls { f.l + f.s } else { f.l + eps };
    if min >= 0.0 && max <= bound && sum_sq >= floor {
        return FiverCheck {
            ok: true,
            reason: "0 <= min <= max <= sqrt(l+eps) and q^2+r^2+s^2 >= floor",
        };
    }
    FiverCheck {
        ok: false,
        reason: "no branch holds",
    }
}

/// `W(x,y,z)` for a fiver with `p != 0`.
pub fn eval_w(f: &Fiver, x: f64, y: f64, z: f64) -> Result<f64, ZeroPError> {
    if f.p == 0.0 {
        return Err(ZeroPError);
    }
    let half = 0.5 / f.p;
    let dx = x + f.q * half;
    let dy = y + f.r * half;
    let dz = z + f.s * half;
    Ok(f.p * (dx * dx + dy * dy + dz * dz) - f.l / (4.0 * f.p))
}

/// Evaluators for the derived scalar coefficients `p_{n,m}(t)` and
/// `D_n(t)`, and for the four fivers `L_n(t)`.
///
/// `p_{0,m} = b_m + c_m`; `p_{1,*} = (b_1+c_1, b_2-c_2, b_3-c_3)`;
/// `p_{2,*} = (b_1-c_1, b_2+c_2, b_3-c_3)`; `p_{3,m} = b_m - c_m`.
/// `D_0 = sum_m p_{0,m}^2 + 4 a_0 d_0` where `a_0 != 0`, else `4 d_0`;
/// `D_n = sum_m p_{n,m}^2 - 4 a_n d_n` where `a_n != 0`, else `-4 d_n`.
#[derive(Clone, Debug)]
pub struct DerivedCoefficients {
    a: [Expr; 4],
    d: [Expr; 4],
    /// `p[n][m-1]`, simplified expressions
    p: [[Expr; 3]; 4],
    /// second..fourth fiver entries per `n` (the first is `a_n`, the last `D_n`)
    fiver_qrs: [[Expr; 3]; 4],
}

/// Builds the derived-coefficient evaluators for a problem.
pub fn derived_coefficients(ps: &ProblemSpec) -> DerivedCoefficients {
    let b = &ps.b;
    let c = &ps.c;
    let plus = |m: usize| b[m].clone().add(c[m].clone()).simplify();
    let minus = |m: usize| b[m].clone().sub(c[m].clone()).simplify();
    let p = [
        [plus(1), plus(2), plus(3)],
        [plus(1), minus(2), minus(3)],
        [minus(1), plus(2), minus(3)],
        [minus(1), minus(2), minus(3)],
    ];
    let neg = |e: Expr| e.neg().simplify();
    let fiver_qrs = [
        [neg(plus(1)), neg(plus(2)), neg(plus(3))],
        [plus(1), neg(minus(2)), minus(3)],
        [minus(1), plus(2), minus(3)],
        [neg(minus(1)), minus(2), plus(3)],
    ];
    DerivedCoefficients {
        a: ps.a.clone(),
        d: ps.d.clone(),
        p,
        fiver_qrs,
    }
}

impl DerivedCoefficients {
    /// `p_{n,m}(t)` for `n` in `0..4`, `m` in `1..=3`.
    pub fn p_nm(&self, n: usize, m: usize, t: f64) -> Result<f64, EvalError> {
        self.p[n][m - 1].eval(t)
    }

    /// `D_n(t)`, selecting the degenerate branch when `|a_n(t)| <= TAU_ZERO`.
    pub fn d_n(&self, n: usize, t: f64) -> Result<f64, EvalError> {
        let a_n = self.a[n].eval(t)?;
        let d_n = self.d[n].eval(t)?;
        let sign = if n == 0 { 1.0 } else { -1.0 };
        if a_n.abs() <= TAU_ZERO {
            return Ok(sign * 4.0 * d_n);
        }
        let mut sum = 0.0;
        for m in 1..=3 {
            let p = self.p_nm(n, m, t)?;
            sum += p * p;
        }
        Ok(sum + sign * 4.0 * a_n * d_n)
    }

    /// The fiver `L_n(t) = (a_n, ., ., ., D_n)`.
    pub fn fiver(&self, n: usize, t: f64) -> Result<Fiver, EvalError> {
        Ok(Fiver {
            p: self.a[n].eval(t)?,
            q: self.fiver_qrs[n][0].eval(t)?,
            r: self.fiver_qrs[n][1].eval(t)?,
            s: self.fiver_qrs[n][2].eval(t)?,
            l: self.d_n(n, t)?,
        })
    }
}

/// The sixteen coefficient values of a problem at one time, as four
/// quaternions.
#[derive(Clone, Copy, Debug)]
pub struct CoeffValues {
    pub a: Quaternion,
    pub b: Quaternion,
    pub c: Quaternion,
    pub d: Quaternion,
}

/// Evaluates all coefficient functions at `t`.
pub fn coeffs_at(ps: &ProblemSpec, t: f64) -> Result<CoeffValues, EvalError> {
    let quat = |arr: &[Expr; 4]| -> Result<Quaternion, EvalError> {
        Ok(Quaternion::new(
            arr[0].eval(t)?,
            arr[1].eval(t)?,
            arr[2].eval(t)?,
            arr[3].eval(t)?,
        ))
    };
    Ok(CoeffValues {
        a: quat(&ps.a)?,
        b: quat(&ps.b)?,
        c: quat(&ps.c)?,
        d: quat(&ps.d)?,
    })
}

/// The symbols `(A, B, C, D)` of the coefficients at `t`.
pub fn symbols_at(ps: &ProblemSpec, t: f64) -> Result<[Mat4; 4], EvalError> {
    let cv = coeffs_at(ps, t)?;
    Ok([cv.a.symbol(), cv.b.symbol(), cv.c.symbol(), cv.d.symbol()])
}

/// Right-hand side of the real 4-component system in the state
/// `(q0, q1, q2, q3)`:
///
/// `q0' = -a0 q0^2 - {b0+c0+2(a1 q1 + a2 q2 + a3 q3)} q0 + P`, and
/// cyclically for the remaining components, with
/// `P = a0 (q1^2+q2^2+q3^2) - (b1+c1) q1 - (b2+c2) q2 - (b3+c3) q3 - d0`,
/// `Q = a1 (q0^2+q2^2+q3^2) + (b1+c1) q0 + (b3-c3) q2 - (b2-c2) q3 + d1`,
/// `R = a2 (q0^2+q1^2+q3^2) + (b2+c2) q0 - (b3-c3) q1 + (b1-c1) q3 + d2`,
/// `S = a3 (q0^2+q1^2+q2^2) + (b3+c3) q0 + (b2-c2) q1 - (b1-c1) q2 + d3`.
pub fn real_rhs(ps: &ProblemSpec) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError> {
    let ps = ps.clone();
    move |t, q, dq| {
        let cv = coeffs_at(&ps, t)?;
        let (a, b, c, d) = (cv.a, cv.b, cv.c, cv.d);
        let (a0, a1, a2, a3) = (a.w, a.x, a.y, a.z);
        let bp = |m: usize| match m {
            1 => b.x + c.x,
            2 => b.y + c.y,
            _ => b.z + c.z,
        };
        let bm = |m: usize| match m {
            1 => b.x - c.x,
            2 => b.y - c.y,
            _ => b.z - c.z,
        };
        let b0c0 = b.w + c.w;
        let (q0, q1, q2, q3) = (q[0], q[1], q[2], q[3]);

        let p_val = a0 * (q1 * q1 + q2 * q2 + q3 * q3) - bp(1) * q1 - bp(2) * q2 - bp(3) * q3 - d.w;
        let q_val = a1 * (q0 * q0 + q2 * q2 + q3 * q3) + bp(1) * q0 + bm(3) * q2 - bm(2) * q3 + d.x;
        let r_val = a2 * (q0 * q0 + q1 * q1 + q3 * q3) + bp(2) * q0 - bm(3) * q1 + bm(1) * q3 + d.y;
        let s_val = a3 * (q0 * q0 + q1 * q1 + q2 * q2) + bp(3) * q0 + bm(2) * q1 - bm(1) * q2 + d.z;

        dq[0] = -a0 * q0 * q0 - (b0c0 + 2.0 * (a1 * q1 + a2 * q2 + a3 * q3)) * q0 + p_val;
        dq[1] = -a1 * q1 * q1 - (b0c0 + 2.0 * (a0 * q0 + a2 * q2 + a3 * q3)) * q1 + q_val;
        dq[2] = -a2 * q2 * q2 - (b0c0 + 2.0 * (a0 * q0 + a1 * q1 + a3 * q3)) * q2 + r_val;
        dq[3] = -a3 * q3 * q3 - (b0c0 + 2.0 * (a0 * q0 + a1 * q1 + a2 * q2)) * q3 + s_val;
        Ok(())
    }
}

fn mat_from_slice(s: &[f64]) -> Mat4 {
    let mut m = Mat4::zero();
    for i in 0..4 {
        for j in 0..4 {
            m.0[i][j] = s[4 * i + j];
        }
    }
    m
}

fn mat_to_slice(m: &Mat4, out: &mut [f64]) {
    for i in 0..4 {
        for j in 0..4 {
            out[4 * i + j] = m.0[i][j];
        }
    }
}

/// Right-hand side of the matrix Riccati equation
/// `Y' = -(Y A(t) Y + B(t) Y + Y C(t) + D(t))` on the row-major flattened
/// 16-dimensional state.
pub fn matrix_riccati_rhs(
    ps: &ProblemSpec,
) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError> {
    let ps = ps.clone();
    move |t, y, dy| {
        let [a, b, c, d] = symbols_at(&ps, t)?;
        let ymat = mat_from_slice(y);
        let rhs = ymat
            .matmul(&a)
            .matmul(&ymat)
            .add(&b.matmul(&ymat))
            .add(&ymat.matmul(&c))
            .add(&d)
            .scale(-1.0);
        mat_to_slice(&rhs, dy);
        Ok(())
    }
}

/// Right-hand side of the associated linear system
/// `Phi' = C(t) Phi + A(t) Psi`, `Psi' = -D(t) Phi - B(t) Psi` for
/// `Phi, Psi` of shape 4 x `m` (`m = 1`: vector case; `m = 4`: matrix
/// case). State layout: `Phi` row-major, then `Psi` row-major.
pub fn linear_system_rhs(
    ps: &ProblemSpec,
    m: usize,
) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError> {
    assert!(m == 1 || m == 4, "linear system supports m in {{1, 4}}");
    let ps = ps.clone();
    move |t, state, dstate| {
        let [a, b, c, d] = symbols_at(&ps, t)?;
        let cols = m;
        let n = 4 * cols;
        let (phi, psi) = state.split_at(n);
        let (dphi, dpsi) = dstate.split_at_mut(n);
        // column-wise application of the 4x4 blocks
        for col in 0..cols {
            let mut phi_col = [0.0; 4];
            let mut psi_col = [0.0; 4];
            for row in 0..4 {
                phi_col[row] = phi[cols * row + col];
                psi_col[row] = psi[cols * row + col];
            }
            let dphi_col_c = c.apply(phi_col);
            let dphi_col_a = a.apply(psi_col);
            let dpsi_col_d = d.apply(phi_col);
            let dpsi_col_b = b.apply(psi_col);
            for row in 0..4 {
                dphi[cols * row + col] = dphi_col_c[row] + dphi_col_a[row];
                dpsi[cols * row + col] = -dpsi_col_d[row] - dpsi_col_b[row];
            }
        }
        Ok(())
    }
}

/// Quaternion-valued coefficient function as four component expressions,
/// with Hamilton algebra lifted to the expression level.
#[derive(Clone, Debug, PartialEq)]
pub struct QuatExpr(pub [Expr; 4]);

impl QuatExpr {
    pub fn from_components(c: &[Expr; 4]) -> Self {
        QuatExpr(c.clone())
    }

    pub fn constant(q: Quaternion) -> Self {
        QuatExpr([
            Expr::Num(q.w),
            Expr::Num(q.x),
            Expr::Num(q.y),
            Expr::Num(q.z),
        ])
    }

    pub fn neg(&self) -> Self {
        QuatExpr(self.0.clone().map(|e| e.neg().simplify()))
    }

    pub fn conj(&self) -> Self {
        let [w, x, y, z] = self.0.clone();
        QuatExpr([
            w,
            x.neg().simplify(),
            y.neg().simplify(),
            z.neg().simplify(),
        ])
    }

    /// Hamilton product on component expressions, simplified.
    pub fn mul(&self, o: &QuatExpr) -> Self {
        let [a, b, c, d] = &self.0;
        let [e, f, g, h] = &o.0;
        let term = |x: &Expr, y: &Expr| x.clone().mul(y.clone());
        let w = term(a, e).sub(term(b, f)).sub(term(c, g)).sub(term(d, h));
        let x = term(a, f).add(term(b, e)).add(term(c, h)).sub(term(d, g));
        let y = term(a, g).sub(term(b, h)).add(term(c, e)).add(term(d, f));
        let z = term(a, h).add(term(b, g)).sub(term(c, f)).add(term(d, e));
        QuatExpr([w.simplify(), x.simplify(), y.simplify(), z.simplify()])
    }
}

/// Applies a solution-variable substitution to the coefficients (and maps
/// the initial data along), returning the problem whose solutions
/// correspond one-to-one with the original's.
///
/// - `Negate` (`q -> -q`): `(a,b,c,d) -> (-a, b, c, -d)`.
/// - `Conjugate` (`q -> conj q`): `(a,b,c,d) -> (conj a, conj c, conj b, conj d)`.
/// - `LeftUnit(u)` (`q = u p`): `(a,b,c,d) -> (a u, u^-1 b u, c, u^-1 d)`.
pub fn transform_coefficients(ps: &ProblemSpec, kind: CoeffTransform) -> ProblemSpec {
    let mut out = ps.clone();
    let a = QuatExpr::from_components(&ps.a);
    let b = QuatExpr::from_components(&ps.b);
    let c = QuatExpr::from_components(&ps.c);
    let d = QuatExpr::from_components(&ps.d);
    let (na, nb, nc, nd) = match kind {
        CoeffTransform::Negate => (a.neg(), b, c, d.neg()),
        CoeffTransform::Conjugate => (a.conj(), c.conj(), b.conj(), d.conj()),
        CoeffTransform::LeftUnit(u) => {
            let uq = QuatExpr::constant(u.quaternion());
            let uinv = QuatExpr::constant(-u.quaternion());
            (a.mul(&uq), uinv.mul(&b).mul(&uq), c, uinv.mul(&d))
        }
    };
    out.a = na.0;
    out.b = nb.0;
    out.c = nc.0;
    out.d = nd.0;
    out.gamma = transform_initial_state(ps.gamma, kind);
    out
}

/// Initial data of the transformed problem: the state of
/// `p(t0) = T^-1(q(t0))`.
pub fn transform_initial_state(gamma: [f64; 4], kind: CoeffTransform) -> [f64; 4] {
    let q = Quaternion::from_state(gamma);
    let p = match kind {
        CoeffTransform::Negate => -q,
        CoeffTransform::Conjugate => q.conj(),
        CoeffTransform::LeftUnit(u) => -u.quaternion() * q,
    };
    p.to_state()
}

/// Maps a state of the transformed problem back to a state of the
/// original: `q = T(p)`.
pub fn map_back_state(state: [f64; 4], kind: CoeffTransform) -> [f64; 4] {
    let p = Quaternion::from_state(state);
    let q = match kind {
        CoeffTransform::Negate => -p,
        CoeffTransform::Conjugate => p.conj(),
        CoeffTransform::LeftUnit(u) => u.quaternion() * p,
    };
    q.to_state()
}

/// The problem with coefficients reflected about `t -> shift - t` (no sign
/// change and no initial-data mapping; used as a building block by the
/// terminal-value criterion).
pub fn reflect_problem(ps: &ProblemSpec, shift: f64) -> ProblemSpec {
    let mut out = ps.clone();
    let refl =
        |arr: &[Expr; 4]| -> [Expr; 4] { arr.clone().map(|e| e.reflect_time(shift).simplify()) };
    out.a = refl(&ps.a);
    out.b = refl(&ps.b);
    out.c = refl(&ps.c);
    out.d = refl(&ps.d);
    out
}
