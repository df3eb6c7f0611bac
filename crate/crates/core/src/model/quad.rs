//! Adaptive quadrature: cumulative antiderivatives on an adaptive mesh
//! (interpolated by cubic Hermite) and the weighted exponential integral
//! `I_{g,h}(xi, t) = integral_xi^t exp(-integral_tau^t g) h(tau) dtau`.
//!
//! The integral appears inside further integrals in the partition
//! criterion, so the inner antiderivatives are built once per interval and
//! then evaluated pointwise instead of re-integrating per query.

use thiserror::Error;

use crate::expr::EvalError;
use crate::tol::{QUAD_ABS_TOL, QUAD_MAX_DEPTH, QUAD_REL_TOL};

/// Quadrature failure.
#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge on [{lo}, {hi}] (max depth reached)")]
    NonConvergence { lo: f64, hi: f64 },
    #[error("integrand evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("exponential weight overflows at t = {t}")]
    Overflow { t: f64 },
    #[error("bad integration interval: upper limit {hi} below lower limit {lo}")]
    BadInterval { lo: f64, hi: f64 },
}

pub(crate) fn guarded_exp(x: f64, t: f64) -> Result<f64, QuadError> {
    if x > 700.0 {
        return Err(QuadError::Overflow { t });
    }
    Ok(x.exp())
}

/// The cumulative antiderivative `F(x) = integral_lo^x f` on an adaptive
/// mesh, evaluated between nodes by cubic Hermite (`F' = f` is known
/// exactly at the nodes).
pub struct CumulativeIntegral {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

const SEED_SLICES: usize = 64;
const MIN_DEPTH: u32 = 2;

impl CumulativeIntegral {
    /// Builds the antiderivative of `f` on `[lo, hi]` by adaptive Simpson
    /// refinement with the module tolerances. `lo == hi` yields the zero
    /// function on a degenerate interval.
    pub fn build<F>(f: F, lo: f64, hi: f64) -> Result<Self, QuadError>
    where
        F: Fn(f64) -> Result<f64, QuadError>,
    {
        if hi < lo {
            return Err(QuadError::BadInterval { lo, hi });
        }
        if hi == lo {
            return Ok(CumulativeIntegral {
                nodes: vec![lo],
                values: vec![0.0],
                derivs: vec![f(lo)?],
            });
        }
        let eval = |x: f64| -> Result<f64, QuadError> {
            let v = f(x)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(QuadError::Overflow { t: x })
            }
        };
        let mut b = Builder {
            nodes: vec![lo],
            values: vec![0.0],
            derivs: vec![eval(lo)?],
        };
        let slice_tol = QUAD_ABS_TOL / SEED_SLICES as f64;
        let mut fa = b.derivs[0];
        for i in 0..SEED_SLICES {
            let a = lo + (hi - lo) * i as f64 / SEED_SLICES as f64;
            let c = lo + (hi - lo) * (i + 1) as f64 / SEED_SLICES as f64;
            let m = 0.5 * (a + c);
            let fm = eval(m)?;
            let fc = eval(c)?;
            let whole = simpson(c - a, fa, fm, fc);
            b.segment(&eval, a, fa, m, fm, c, fc, whole, slice_tol, 0)?;
            fa = fc;
        }
        Ok(CumulativeIntegral {
            nodes: b.nodes,
            values: b.values,
            derivs: b.derivs,
        })
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// The full integral `F(hi)`.
    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `F(x)`, clamped to the built interval.
    pub fn eval(&self, x: f64) -> f64 {
        if self.nodes.len() == 1 {
            return 0.0;
        }
        let x = x.clamp(self.lo(), self.hi());
        let i = match self
            .nodes
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.values[i],
            Err(0) => 0,
            Err(i) => (i - 1).min(self.nodes.len() - 2),
        };
        let (xa, xb) = (self.nodes[i], self.nodes[i + 1]);
        let h = xb - xa;
        let s = (x - xa) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h10 * h * self.derivs[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.derivs[i + 1]
    }
}

fn simpson(len: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    len / 6.0 * (fa + 4.0 * fm + fb)
}

struct Builder {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn segment<F>(
        &mut self,
        f: &F,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<(), QuadError>
    where
        F: Fn(f64) -> Result<f64, QuadError>,
    {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let s_left = simpson(m - a, fa, flm, fm);
        let s_right = simpson(b - m, fm, frm, fb);
        let err = (s_left + s_right - whole) / 15.0;
        let budget = 0.5 * tol + QUAD_REL_TOL * (s_left.abs() + s_right.abs());
        // the error estimate can vanish accidentally at symmetry points, so
        // never accept before a minimum refinement depth
        if (depth >= MIN_DEPTH && err.abs() <= budget) || a == lm || m == rm {
            let base = *self.values.last().unwrap();
            self.push(m, base + s_left + 0.5 * err, fm);
            self.push(b, base + s_left + s_right + err, fb);
            return Ok(());
        }
        if depth >= QUAD_MAX_DEPTH {
            return Err(QuadError::NonConvergence { lo: a, hi: b });
        }
        self.segment(f, a, fa, lm, flm, m, fm, s_left, 0.5 * tol, depth + 1)?;
        self.segment(f, m, fm, rm, frm, b, fb, s_right, 0.5 * tol, depth + 1)
    }

    fn push(&mut self, x: f64, v: f64, d: f64) {
        debug_assert!(x > *self.nodes.last().unwrap());
        self.nodes.push(x);
        self.values.push(v);
        self.derivs.push(d);
    }
}

/// Pointwise evaluator for `I_{g,h}(lo, s)` on a fixed interval:
/// `I(s) = exp(-G(s)) * integral_lo^s exp(G(tau)) h(tau) dtau` with
/// `G = integral_lo^. g`.
pub struct IghEvaluator {
    g_cum: CumulativeIntegral,
    weighted_h_cum: CumulativeIntegral,
}

impl IghEvaluator {
    pub fn build<G, H>(g: G, h: H, lo: f64, hi: f64) -> Result<Self, QuadError>
    where
        G: Fn(f64) -> Result<f64, QuadError>,
        H: Fn(f64) -> Result<f64, QuadError>,
    {
        let g_cum = CumulativeIntegral::build(&g, lo, hi)?;
        let weighted_h_cum = CumulativeIntegral::build(
            |tau| Ok(guarded_exp(g_cum.eval(tau), tau)? * h(tau)?),
            lo,
            hi,
        )?;
        Ok(IghEvaluator {
            g_cum,
            weighted_h_cum,
        })
    }

    /// `I_{g,h}(lo, s)`.
    pub fn eval(&self, s: f64) -> Result<f64, QuadError> {
        Ok(guarded_exp(-self.g_cum.eval(s), s)? * self.weighted_h_cum.eval(s))
    }
}

/// `I_{g,h}(xi, t)`: the exponentially weighted integral of `h` on
/// `[xi, t]`. Requires `t >= xi`; the empty interval yields zero.
pub fn quad_igh<G, H>(g: G, h: H, xi: f64, t: f64) -> Result<f64, QuadError>
where
    G: Fn(f64) -> Result<f64, EvalError>,
    H: Fn(f64) -> Result<f64, EvalError>,
{
    if t < xi {
        return Err(QuadError::BadInterval { lo: xi, hi: t });
    }
    if t == xi {
        return Ok(0.0);
    }
    let ev = IghEvaluator::build(|s| Ok(g(s)?), |s| Ok(h(s)?), xi, t)?;
    ev.eval(t)
}
