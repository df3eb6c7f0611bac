//! Quaternion value type, Hamilton algebra, and the 4x4 real matrix
//! representation ("symbol") of a quaternion.
//!
//! The symbol map sends `m = m0 + i m1 + j m2 + k m3` to
//! `M = m0 E + m1 I + m2 J + m3 K` where `E` is the identity and `I`, `J`,
//! `K` satisfy the same relations as the imaginary unities
//! (`I^2 = J^2 = K^2 = IJK = -E`, `IJ = -JI = K`). The map is a linear,
//! injective algebra homomorphism, so quaternion multiplication becomes
//! matrix multiplication.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::tol::TAU_SYM;

/// A quaternion `w + i x + j y + k z` over f64 components.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Inverting the zero quaternion.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("cannot invert the zero quaternion")]
pub struct ZeroDivisorError;

/// A 4x4 matrix failed symbol-pattern validation: the (signed) entry pair
/// that must agree differs by more than the tolerance.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error(
    "matrix is not a quaternion symbol: entry ({row_a},{col_a}) = {val_a} \
     and entry ({row_b},{col_b}) = {val_b} violate the sign pattern \
     (|delta| = {delta})"
)]
pub struct SymbolPatternError {
    pub row_a: usize,
    pub col_a: usize,
    pub val_a: f64,
    pub row_b: usize,
    pub col_b: usize,
    pub val_b: f64,
    pub delta: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// A real quaternion `w + 0i + 0j + 0k`.
    pub const fn real(w: f64) -> Self {
        Quaternion::new(w, 0.0, 0.0, 0.0)
    }

    /// Builds the quaternion written `q = q0 - i q1 - j q2 - k q3` from the
    /// state vector `(q0, q1, q2, q3)` of the real 4-component system.
    pub fn from_state(s: [f64; 4]) -> Self {
        Quaternion::new(s[0], -s[1], -s[2], -s[3])
    }

    /// Inverse of [`Quaternion::from_state`].
    pub fn to_state(self) -> [f64; 4] {
        [self.w, -self.x, -self.y, -self.z]
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `q^-1 = conj(q) / |q|^2`; errors on the zero quaternion.
    pub fn inverse(self) -> Result<Self, ZeroDivisorError> {
        let n2 = self.norm_sq();
        if n2 == 0.0 {
            return Err(ZeroDivisorError);
        }
        Ok(self.conj().scale(1.0 / n2))
    }

    /// The vector part `(q_1, q_2, q_3)` of `q = q_0 + i q_1 + j q_2 + k q_3`.
    pub fn vec_part(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// The symbol matrix `w E + x I + y J + z K`.
    pub fn symbol(self) -> Mat4 {
        let Quaternion { w, x, y, z } = self;
        Mat4([[w, x, y, -z], [-x, w, -z, -y], [-y, z, w, x], [z, y, -x, w]])
    }
}

/// Conjugate, norm and inverse of a quaternion in one call.
///
/// The inverse requires `q != 0`.
pub fn conj_norm_inv(q: Quaternion) -> Result<(Quaternion, f64, Quaternion), ZeroDivisorError> {
    Ok((q.conj(), q.norm(), q.inverse()?))
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Hamilton product under `i^2 = j^2 = k^2 = ijk = -1`, `ij = -ji = k`.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        let Quaternion {
            w: a,
            x: b,
            y: c,
            z: d,
        } = self;
        let Quaternion {
            w: e,
            x: f,
            y: g,
            z: h,
        } = o;
        Quaternion::new(
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        self.scale(s)
    }
}

/// A real 4x4 matrix, row-major. Used both for quaternion symbols and for
/// the fundamental matrices of the associated linear systems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[f64; 4]; 4]);

impl Mat4 {
    pub const fn zero() -> Self {
        Mat4([[0.0; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Mat4::zero();
        for i in 0..4 {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn matmul(&self, o: &Mat4) -> Mat4 {
        let mut r = Mat4::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a != 0.0 {
                    for j in 0..4 {
                        r.0[i][j] += a * o.0[k][j];
                    }
                }
            }
        }
        r
    }

    pub fn add(&self, o: &Mat4) -> Mat4 {
        let mut r = *self;
        for i in 0..4 {
            for j in 0..4 {
                r.0[i][j] += o.0[i][j];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Mat4 {
        let mut r = *self;
        for row in r.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        r
    }

    pub fn apply(&self, v: [f64; 4]) -> [f64; 4] {
        let mut r = [0.0; 4];
        for (out, row) in r.iter_mut().zip(&self.0) {
            *out = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        r
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn max_abs_diff(&self, o: &Mat4) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        m
    }

    /// Determinant by Laplace expansion along the first row.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        let minor = |r: [usize; 3], c: [usize; 3]| -> f64 {
            m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
                - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
                + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
        };
        let rows = [1, 2, 3];
        m[0][0] * minor(rows, [1, 2, 3]) - m[0][1] * minor(rows, [0, 2, 3])
            + m[0][2] * minor(rows, [0, 1, 3])
            - m[0][3] * minor(rows, [0, 1, 2])
    }
}

// Entry groups of the symbol pattern: within a group every (index, sign)
// slot carries the same component. The first slot of each group is the
// reference that `unsymbol` reads from.
const SYMBOL_GROUPS: [[(usize, usize, f64); 4]; 4] = [
    // w
    [(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)],
    // x
    [(0, 1, 1.0), (1, 0, -1.0), (2, 3, 1.0), (3, 2, -1.0)],
    // y
    [(0, 2, 1.0), (2, 0, -1.0), (1, 3, -1.0), (3, 1, 1.0)],
    // z
    [(0, 3, -1.0), (1, 2, -1.0), (2, 1, 1.0), (3, 0, 1.0)],
];

/// Reads a quaternion back from its symbol matrix, validating the sign
/// pattern with absolute tolerance [`TAU_SYM`].
///
/// `unsymbol(q.symbol()) == q` exactly: the components are read from the
/// first matrix row, not averaged.
pub fn unsymbol(m: &Mat4) -> Result<Quaternion, SymbolPatternError> {
    unsymbol_with_tol(m, TAU_SYM)
}

/// [`unsymbol`] with a caller-chosen pattern tolerance (matrices produced
/// by integration carry integration-level roundoff).
pub fn unsymbol_with_tol(m: &Mat4, tol: f64) -> Result<Quaternion, SymbolPatternError> {
    let mut comps = [0.0; 4];
    for (g, group) in SYMBOL_GROUPS.iter().enumerate() {
        let (r0, c0, s0) = group[0];
        let reference = s0 * m.0[r0][c0];
        for &(r, c, s) in &group[1..] {
            let val = s * m.0[r][c];
            let delta = (val - reference).abs();
            if delta > tol {
                return Err(SymbolPatternError {
                    row_a: r0,
                    col_a: c0,
                    val_a: m.0[r0][c0],
                    row_b: r,
                    col_b: c,
                    val_b: m.0[r][c],
                    delta,
                });
            }
        }
        comps[g] = reference;
    }
    Ok(Quaternion::new(comps[0], comps[1], comps[2], comps[3]))
}

pub fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_quat_eq(a: Quaternion, b: Quaternion, tol: f64) {
        assert!(
            (a - b).norm() <= tol,
            "quaternions differ: {a:?} vs {b:?} (tol {tol})"
        );
    }

    #[test]
    fn unit_relations() {
        // ij = k, ji = -k, and the remaining cycle.
        assert_eq!(Quaternion::I * Quaternion::J, Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::I, -Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::K, Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::I, Quaternion::J);
        assert_eq!(Quaternion::I * Quaternion::I, -Quaternion::ONE);
        assert_eq!(Quaternion::J * Quaternion::J, -Quaternion::ONE);
        assert_eq!(Quaternion::K * Quaternion::K, -Quaternion::ONE);
        // ijk = -1
        assert_eq!(
            Quaternion::I * Quaternion::J * Quaternion::K,
            -Quaternion::ONE
        );
    }

    #[test]
    fn multiplication_by_one_is_identity() {
        let q = Quaternion::new(1.5, -2.0, 0.25, 3.0);
        assert_eq!(q * Quaternion::ONE, q);
        assert_eq!(Quaternion::ONE * q, q);
    }

    #[test]
    fn product_via_symbol_oracle() {
        // (1+i)(1-i) computed independently by multiplying the symbols and
        // reading the result back.
        let p = Quaternion::new(1.0, 1.0, 0.0, 0.0);
        let q = Quaternion::new(1.0, -1.0, 0.0, 0.0);
        let via_symbols = unsymbol(&p.symbol().matmul(&q.symbol())).unwrap();
        assert_eq!(via_symbols, Quaternion::real(2.0));
        assert_eq!(p * q, via_symbols);
    }

    #[test]
    fn conj_norm_inverse() {
        let (c, n, inv) = conj_norm_inv(Quaternion::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(c, Quaternion::new(1.0, -1.0, 0.0, 0.0));
        assert!((n - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_quat_eq(
            inv * Quaternion::new(1.0, 1.0, 0.0, 0.0),
            Quaternion::ONE,
            1e-15,
        );

        // norm(1+i+j+k) = sqrt(4) = 2 by direct arithmetic
        assert!((Quaternion::new(1.0, 1.0, 1.0, 1.0).norm() - 2.0).abs() < 1e-15);

        // real subfield: 2^-1 = 0.5
        assert_eq!(
            Quaternion::real(2.0).inverse().unwrap(),
            Quaternion::real(0.5)
        );

        assert!(Quaternion::ZERO.inverse().is_err());
    }

    #[test]
    fn conj_is_anti_automorphism() {
        let p = Quaternion::new(0.3, -1.2, 0.7, 2.0);
        let q = Quaternion::new(-0.5, 0.25, 1.5, -0.75);
        assert_eq!((p * q).conj(), q.conj() * p.conj());
        assert_eq!(p.conj().conj(), p);
        let n2 = (p * p.conj()).w;
        assert!((n2 - p.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn symbol_of_units_matches_printed_matrices() {
        assert_eq!(Quaternion::ONE.symbol(), Mat4::identity());
        let i = Quaternion::I.symbol();
        assert_eq!(
            i,
            Mat4([
                [0.0, 1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0, 0.0],
            ])
        );
        let j = Quaternion::J.symbol();
        assert_eq!(
            j,
            Mat4([
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, -1.0],
                [-1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
            ])
        );
        let k = Quaternion::K.symbol();
        assert_eq!(
            k,
            Mat4([
                [0.0, 0.0, 0.0, -1.0],
                [0.0, 0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
            ])
        );
        // I^2 = J^2 = K^2 = IJK = -E, IJ = -JI = K
        let neg_e = Mat4::identity().scale(-1.0);
        assert_eq!(i.matmul(&i), neg_e);
        assert_eq!(j.matmul(&j), neg_e);
        assert_eq!(k.matmul(&k), neg_e);
        assert_eq!(i.matmul(&j).matmul(&k), neg_e);
        assert_eq!(i.matmul(&j), k);
        assert_eq!(j.matmul(&i), k.scale(-1.0));
    }

    #[test]
    fn unsymbol_round_trip_and_errors() {
        assert_eq!(unsymbol(&Mat4::identity()).unwrap(), Quaternion::ONE);
        let q = Quaternion::new(3.0, -2.0, 1.0, 0.0);
        assert_eq!(unsymbol(&q.symbol()).unwrap(), q);

        let mut diag = Mat4::zero();
        for i in 0..4 {
            diag.0[i][i] = (i + 1) as f64;
        }
        let err = unsymbol(&diag).unwrap_err();
        assert_eq!((err.row_a, err.col_a), (0, 0));
        assert_eq!((err.row_b, err.col_b), (1, 1));
    }

    #[test]
    fn vec_part_and_norm3() {
        assert_eq!(Quaternion::real(5.0).vec_part(), [0.0, 0.0, 0.0]);
        assert_eq!(
            Quaternion::new(1.0, 2.0, 3.0, 4.0).vec_part(),
            [2.0, 3.0, 4.0]
        );
        let v = Quaternion::new(0.0, 1.0, 1.0, 1.0);
        assert!((norm3(v.vec_part()) - 3.0_f64.sqrt()).abs() < 1e-15);
        assert!(norm3(v.vec_part()) <= v.norm() + 1e-15);
    }

    #[test]
    fn state_convention_round_trip() {
        let s = [1.0, 2.0, -3.0, 0.5];
        let q = Quaternion::from_state(s);
        assert_eq!(q, Quaternion::new(1.0, -2.0, 3.0, -0.5));
        assert_eq!(q.to_state(), s);
    }

    #[test]
    fn determinant_of_symbol_is_fourth_power_of_norm() {
        let q = Quaternion::new(1.0, -2.0, 0.5, 3.0);
        let det = q.symbol().det();
        let n4 = q.norm_sq() * q.norm_sq();
        assert!((det - n4).abs() <= 1e-10 * n4);
    }
}
