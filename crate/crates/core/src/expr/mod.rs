//! Scalar coefficient functions of `t`: parsing, evaluation, symbolic
//! differentiation, and problem configuration files.
//!
//! Expressions are immutable trees over the grammar
//! `{numbers, t, pi, e, + - * / ^, sin cos tan exp ln sqrt abs tanh atan}`.
//! Evaluation never returns NaN or infinity: domain violations surface as
//! [`EvalError`]. Differentiation is purely symbolic and stays inside the
//! same tree type (plus an internal `sign` node produced by `d/dt abs`).

pub mod config;
mod parser;

use std::fmt;

use thiserror::Error;

pub use parser::{parse_expr, ParseError};

/// Binary operators, in source form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Unary functions of the grammar. `Signum` is internal: it is produced by
/// differentiating `abs` (with `sign(0) = 0`) and is printable but not part
/// of the input grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Atan,
    Signum,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Signum => "sign",
        }
    }
}

/// Expression tree over the scalar variable `t`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Pi,
    E,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Domain violation during evaluation, carrying the offending node (pretty
/// printed) and the evaluation point.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("domain error at t = {t}: {kind} in `{node}`")]
pub struct EvalError {
    pub kind: DomainKind,
    pub node: String,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LnNonPositive,
    SqrtNegative,
    DivisionByZero,
    PowDomain,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::LnNonPositive => "ln of a non-positive value",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::PowDomain => "power outside the real domain",
            DomainKind::NonFinite => "non-finite result",
        };
        f.write_str(s)
    }
}

// tree-builder methods, not operator-trait implementations
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn time() -> Expr {
        Expr::Time
    }

    pub fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    pub fn add(self, o: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(self), Box::new(o))
    }

    pub fn sub(self, o: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(self), Box::new(o))
    }

    pub fn mul(self, o: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(self), Box::new(o))
    }

    pub fn div(self, o: Expr) -> Expr {
        Expr::Bin(BinOp::Div, Box::new(self), Box::new(o))
    }

    pub fn pow(self, o: Expr) -> Expr {
        Expr::Bin(BinOp::Pow, Box::new(self), Box::new(o))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    /// True for the literal constant zero (used by the simplifier and by
    /// expression-level identity checks).
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn const_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Pi => Some(std::f64::consts::PI),
            Expr::E => Some(std::f64::consts::E),
            _ => None,
        }
    }

    /// Evaluates the expression at time `t`. Domain violations and
    /// non-finite intermediate results raise an [`EvalError`]; a finite
    /// result is always finite.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let err = |kind: DomainKind, node: &Expr| EvalError {
            kind,
            node: node.to_string(),
            t,
        };
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Time => t,
            Expr::Pi => std::f64::consts::PI,
            Expr::E => std::f64::consts::E,
            Expr::Neg(u) => -u.eval(t)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(t)?;
                let y = b.eval(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(err(DomainKind::DivisionByZero, self));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let r = x.powf(y);
                        if r.is_nan() {
                            return Err(err(DomainKind::PowDomain, self));
                        }
                        r
                    }
                }
            }
            Expr::Call(f, u) => {
                let x = u.eval(t)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(err(DomainKind::LnNonPositive, self));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(err(DomainKind::SqrtNegative, self));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Tanh => x.tanh(),
                    Func::Atan => x.atan(),
                    Func::Signum => {
                        if x == 0.0 {
                            0.0
                        } else {
                            x.signum()
                        }
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(DomainKind::NonFinite, self))
        }
    }

    /// Symbolic derivative with respect to `t`, followed by a light
    /// simplification pass. `d/dt abs(u) = sign(u) * u'` with `sign(0) = 0`.
    pub fn diff(&self) -> Expr {
        self.diff_raw().simplify()
    }

    fn diff_raw(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::E => Expr::Num(0.0),
            Expr::Time => Expr::Num(1.0),
            Expr::Neg(u) => u.diff_raw().neg(),
            Expr::Bin(BinOp::Add, a, b) => a.diff_raw().add(b.diff_raw()),
            Expr::Bin(BinOp::Sub, a, b) => a.diff_raw().sub(b.diff_raw()),
            Expr::Bin(BinOp::Mul, a, b) => {
                let left = a.diff_raw().mul((**b).clone());
                let right = (**a).clone().mul(b.diff_raw());
                left.add(right)
            }
            Expr::Bin(BinOp::Div, a, b) => {
                // (a'b - ab') / b^2
                let num = a
                    .diff_raw()
                    .mul((**b).clone())
                    .sub((**a).clone().mul(b.diff_raw()));
                num.div((**b).clone().pow(Expr::Num(2.0)))
            }
            Expr::Bin(BinOp::Pow, a, b) => {
                if let Some(n) = b.const_value() {
                    // power rule: n * a^(n-1) * a'
                    Expr::Num(n)
                        .mul((**a).clone().pow(Expr::Num(n - 1.0)))
                        .mul(a.diff_raw())
                } else if let Some(c) = a.const_value() {
                    // c^b * ln(c) * b'
                    self.clone().mul(Expr::Num(c.ln())).mul(b.diff_raw())
                } else {
                    // a^b * (b' ln a + b a'/a)
                    let inner = b
                        .diff_raw()
                        .mul(Expr::call(Func::Ln, (**a).clone()))
                        .add((**b).clone().mul(a.diff_raw().div((**a).clone())));
                    (*self).clone().mul(inner)
                }
            }
            Expr::Call(f, u) => {
                let du = u.diff_raw();
                let u = (**u).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => Expr::call(Func::Sin, u).neg(),
                    Func::Tan => {
                        // 1 / cos(u)^2
                        return Expr::Num(1.0)
                            .div(Expr::call(Func::Cos, u).pow(Expr::Num(2.0)))
                            .mul(du);
                    }
                    Func::Exp => Expr::call(Func::Exp, u),
                    Func::Ln => return du.div(u),
                    Func::Sqrt => {
                        return du.div(Expr::Num(2.0).mul(Expr::call(Func::Sqrt, u)));
                    }
                    Func::Abs => Expr::call(Func::Signum, u),
                    Func::Tanh => {
                        // 1 - tanh(u)^2
                        Expr::Num(1.0).sub(Expr::call(Func::Tanh, u).pow(Expr::Num(2.0)))
                    }
                    Func::Atan => {
                        return du.div(Expr::Num(1.0).add(u.pow(Expr::Num(2.0))));
                    }
                    // sign is piecewise constant
                    Func::Signum => return Expr::Num(0.0),
                };
                outer.mul(du)
            }
        }
    }

    /// Light simplification: constant folding plus `0`/`1` identities.
    /// Constants are folded only when the folded value is finite.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Time | Expr::Pi | Expr::E => self.clone(),
            Expr::Neg(u) => {
                let u = u.simplify();
                match u {
                    Expr::Num(v) => Expr::Num(-v),
                    Expr::Neg(inner) => *inner,
                    other => other.neg(),
                }
            }
            Expr::Bin(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
                    let v = match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        BinOp::Div => {
                            if *y == 0.0 {
                                f64::NAN
                            } else {
                                x / y
                            }
                        }
                        BinOp::Pow => x.powf(*y),
                    };
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
                match op {
                    BinOp::Add => {
                        if a.is_zero() {
                            b
                        } else if b.is_zero() {
                            a
                        } else {
                            a.add(b)
                        }
                    }
                    BinOp::Sub => {
                        if b.is_zero() {
                            a
                        } else if a.is_zero() {
                            b.neg()
                        } else {
                            a.sub(b)
                        }
                    }
                    BinOp::Mul => {
                        if a.is_zero() || b.is_zero() {
                            Expr::Num(0.0)
                        } else if matches!(a, Expr::Num(v) if v == 1.0) {
                            b
                        } else if matches!(b, Expr::Num(v) if v == 1.0) {
                            a
                        } else {
                            a.mul(b)
                        }
                    }
                    BinOp::Div => {
                        if matches!(b, Expr::Num(v) if v == 1.0) {
                            a
                        } else if a.is_zero() && matches!(b, Expr::Num(v) if v != 0.0) {
                            Expr::Num(0.0)
                        } else {
                            a.div(b)
                        }
                    }
                    BinOp::Pow => {
                        if matches!(b, Expr::Num(v) if v == 1.0) {
                            a
                        } else if matches!(b, Expr::Num(v) if v == 0.0) {
                            Expr::Num(1.0)
                        } else {
                            a.pow(b)
                        }
                    }
                }
            }
            Expr::Call(f, u) => {
                let u = u.simplify();
                if let Expr::Num(x) = u {
                    let v = match f {
                        Func::Sin => x.sin(),
                        Func::Cos => x.cos(),
                        Func::Tan => x.tan(),
                        Func::Exp => x.exp(),
                        Func::Ln => x.ln(),
                        Func::Sqrt => x.sqrt(),
                        Func::Abs => x.abs(),
                        Func::Tanh => x.tanh(),
                        Func::Atan => x.atan(),
                        Func::Signum => {
                            if x == 0.0 {
                                0.0
                            } else {
                                x.signum()
                            }
                        }
                    };
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
                Expr::Call(*f, Box::new(u))
            }
        }
    }

    /// Substitutes `t -> (shift - t)`, the time reflection used by the
    /// terminal-value criterion.
    pub fn reflect_time(&self, shift: f64) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::E => self.clone(),
            Expr::Time => Expr::Num(shift).sub(Expr::Time),
            Expr::Neg(u) => u.reflect_time(shift).neg(),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.reflect_time(shift)),
                Box::new(b.reflect_time(shift)),
            ),
            Expr::Call(f, u) => Expr::call(*f, u.reflect_time(shift)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            // negative literals print with a leading minus sign
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

/// Pretty printer. The output re-parses to the identical tree: parentheses
/// are inserted exactly where precedence or associativity requires them.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() && *v == 0.0 {
                    f.write_str("0")
                } else {
                    // negative literals re-parse as unary minus (value-equal)
                    write!(f, "{v}")
                }
            }
            Expr::Time => f.write_str("t"),
            Expr::Pi => f.write_str("pi"),
            Expr::E => f.write_str("e"),
            Expr::Neg(u) => {
                f.write_str("-")?;
                // unary minus binds looser than ^ and tighter than * /
                paren(f, u, u.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                match op {
                    BinOp::Pow => {
                        // right-associative; unary minus on the left needs parens
                        paren(f, a, a.precedence() <= 4)?;
                        write!(f, " {sym} ")?;
                        paren(f, b, b.precedence() < 4)
                    }
                    _ => {
                        paren(f, a, a.precedence() < prec)?;
                        write!(f, " {sym} ")?;
                        paren(f, b, b.precedence() <= prec)
                    }
                }
            }
            Expr::Call(func, u) => write!(f, "{}({u})", func.name()),
        }
    }
}
