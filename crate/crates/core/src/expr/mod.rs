//! Scalar expressions in the complex parameters `t1..tr`.
//!
//! Every parameter-dependent coefficient of a system (pole locations,
//! Laurent coefficients, polynomial parts) is a [`ParamExpr`]. The class is
//! closed under exact differentiation in each parameter, see [`ParamExpr::diff`].
//!
//! `log` and `sqrt` use the principal branch (argument in `(-pi, pi]`).
//! Derivatives are only meaningful away from the negative real axis cut of
//! those functions; callers are responsible for not differentiating across it.

mod diff;
mod parser;

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use parser::parse_expr;

/// A point `t = (t1, ..., tr)` in parameter space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterPoint(pub Vec<Complex64>);

impl ParameterPoint {
    pub fn new(coords: Vec<Complex64>) -> Self {
        ParameterPoint(coords)
    }

    pub fn empty() -> Self {
        ParameterPoint(Vec::new())
    }

    pub fn real(coords: &[f64]) -> Self {
        ParameterPoint(coords.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    /// Copy of this point with coordinate `j` (0-based) shifted by `h`.
    pub fn shifted(&self, j: usize, h: Complex64) -> Self {
        let mut c = self.0.clone();
        c[j] += h;
        ParameterPoint(c)
    }
}

/// Expression tree. Parameter indices are stored 0-based and printed 1-based
/// (`Param(0)` prints as `t1`).
#[derive(Debug, Clone, PartialEq)]
pub enum ParamExpr {
    Const(Complex64),
    Param(usize),
    Neg(Box<ParamExpr>),
    Add(Box<ParamExpr>, Box<ParamExpr>),
    Sub(Box<ParamExpr>, Box<ParamExpr>),
    Mul(Box<ParamExpr>, Box<ParamExpr>),
    Div(Box<ParamExpr>, Box<ParamExpr>),
    Pow(Box<ParamExpr>, i32),
    Exp(Box<ParamExpr>),
    Log(Box<ParamExpr>),
    Sqrt(Box<ParamExpr>),
    Sin(Box<ParamExpr>),
    Cos(Box<ParamExpr>),
}

use ParamExpr::*;

impl ParamExpr {
    pub fn zero() -> Self {
        Const(Complex64::new(0.0, 0.0))
    }

    pub fn one() -> Self {
        Const(Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Const(c)
    }

    pub fn real(r: f64) -> Self {
        Const(Complex64::new(r, 0.0))
    }

    /// Parameter `t{index}` with a 1-based index, matching the surface syntax.
    pub fn param(index: usize) -> Self {
        assert!(index >= 1, "parameters are numbered from 1");
        Param(index - 1)
    }

    /// True if the tree is a literal zero constant.
    pub fn is_zero(&self) -> bool {
        matches!(self, Const(c) if *c == Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Const(c) if *c == Complex64::new(1.0, 0.0))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Largest 1-based parameter index referenced, 0 when parameter free.
    pub fn max_param(&self) -> usize {
        match self {
            Const(_) => 0,
            Param(k) => k + 1,
            Neg(a) | Pow(a, _) | Exp(a) | Log(a) | Sqrt(a) | Sin(a) | Cos(a) => a.max_param(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.max_param().max(b.max_param()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Const(_) | Param(_) => 1,
            Neg(a) | Pow(a, _) | Exp(a) | Log(a) | Sqrt(a) | Sin(a) | Cos(a) => 1 + a.depth(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Check every parameter reference against the declared count.
    pub fn check_arity(&self, num_params: usize) -> Result<()> {
        let m = self.max_param();
        if m > num_params {
            return Err(Error::ParamOutOfRange { index: m, declared: num_params });
        }
        Ok(())
    }

    /// Evaluate at `t`. Division by zero, log of zero, negative powers of
    /// zero and non-finite results are reported as `EVAL_SINGULAR`.
    pub fn eval(&self, t: &ParameterPoint) -> Result<Complex64> {
        let v = match self {
            Const(c) => *c,
            Param(k) => *t.0.get(*k).ok_or(Error::ParamOutOfRange { index: k + 1, declared: t.len() })?,
            Neg(a) => -a.eval(t)?,
            Add(a, b) => a.eval(t)? + b.eval(t)?,
            Sub(a, b) => a.eval(t)? - b.eval(t)?,
            Mul(a, b) => a.eval(t)? * b.eval(t)?,
            Div(a, b) => {
                let num = a.eval(t)?;
                let den = b.eval(t)?;
                if den.norm() == 0.0 {
                    return Err(Error::EvalSingular("division by zero".into()));
                }
                num / den
            }
            Pow(a, k) => {
                let base = a.eval(t)?;
                if *k < 0 && base.norm() == 0.0 {
                    return Err(Error::EvalSingular("negative power of zero".into()));
                }
                base.powi(*k)
            }
            Exp(a) => a.eval(t)?.exp(),
            Log(a) => {
                let z = a.eval(t)?;
                if z.norm() == 0.0 {
                    return Err(Error::EvalSingular("log of zero".into()));
                }
                on_principal_side(z).ln()
            }
            Sqrt(a) => on_principal_side(a.eval(t)?).sqrt(),
            Sin(a) => a.eval(t)?.sin(),
            Cos(a) => a.eval(t)?.cos(),
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::EvalSingular(format!("non-finite value in `{self}`")));
        }
        Ok(v)
    }

    /// Exact derivative with respect to the 1-based parameter `j`.
    pub fn diff(&self, j: usize) -> ParamExpr {
        assert!(j >= 1, "parameters are numbered from 1");
        diff::derivative(self, j - 1)
    }

    /// Replace parameter `t{j}` (1-based) by an expression.
    pub fn substitute(&self, j: usize, with: &ParamExpr) -> ParamExpr {
        let k = j - 1;
        let s = |a: &ParamExpr| Box::new(a.substitute(j, with));
        match self {
            Const(_) => self.clone(),
            Param(i) if *i == k => with.clone(),
            Param(_) => self.clone(),
            Neg(a) => Neg(s(a)),
            Add(a, b) => Add(s(a), s(b)),
            Sub(a, b) => Sub(s(a), s(b)),
            Mul(a, b) => Mul(s(a), s(b)),
            Div(a, b) => Div(s(a), s(b)),
            Pow(a, n) => Pow(s(a), *n),
            Exp(a) => Exp(s(a)),
            Log(a) => Log(s(a)),
            Sqrt(a) => Sqrt(s(a)),
            Sin(a) => Sin(s(a)),
            Cos(a) => Cos(s(a)),
        }
    }
}

/// Map a signed-zero imaginary part to `+0.0` so that points on the negative
/// real axis get argument `pi`, not `-pi`.
fn on_principal_side(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

// Smart constructors with constant folding. They never fold an operation
// that would be singular, so folding cannot change evaluation errors into
// silent values.

pub(crate) fn fold(c: Complex64) -> Option<ParamExpr> {
    (c.re.is_finite() && c.im.is_finite()).then_some(Const(c))
}

impl std::ops::Neg for ParamExpr {
    type Output = ParamExpr;
    fn neg(self) -> ParamExpr {
        match self {
            Const(c) => Const(-c),
            Neg(a) => *a,
            e => Neg(Box::new(e)),
        }
    }
}

impl std::ops::Add for ParamExpr {
    type Output = ParamExpr;
    fn add(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (Const(a), Const(b)) => Const(a + b),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Add(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Sub for ParamExpr {
    type Output = ParamExpr;
    fn sub(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (Const(a), Const(b)) => Const(a - b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => -b,
            (a, b) => Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Mul for ParamExpr {
    type Output = ParamExpr;
    fn mul(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (Const(a), Const(b)) => Const(a * b),
            (a, _) if a.is_zero() => ParamExpr::zero(),
            (_, b) if b.is_zero() => ParamExpr::zero(),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Div for ParamExpr {
    type Output = ParamExpr;
    fn div(self, rhs: ParamExpr) -> ParamExpr {
        match (self, rhs) {
            (Const(a), Const(b)) if b.norm() != 0.0 => {
                fold(a / b).unwrap_or_else(|| Div(Box::new(Const(a)), Box::new(Const(b))))
            }
            (a, b) if a.is_zero() && b.as_const().is_none_or(|c| c.norm() != 0.0) => ParamExpr::zero(),
            (a, b) if b.is_one() => a,
            (a, b) => Div(Box::new(a), Box::new(b)),
        }
    }
}

impl ParamExpr {
    pub fn powi(self, k: i32) -> ParamExpr {
        match (self, k) {
            (_, 0) => ParamExpr::one(),
            (a, 1) => a,
            (Const(c), k) if k > 0 || c.norm() != 0.0 => Const(c.powi(k)),
            (a, k) => Pow(Box::new(a), k),
        }
    }

    pub fn exp(self) -> ParamExpr {
        match self {
            Const(c) => fold(c.exp()).unwrap_or_else(|| Exp(Box::new(Const(c)))),
            a => Exp(Box::new(a)),
        }
    }

    pub fn ln(self) -> ParamExpr {
        Log(Box::new(self))
    }

    pub fn sqrt(self) -> ParamExpr {
        Sqrt(Box::new(self))
    }

    pub fn sin(self) -> ParamExpr {
        match self {
            Const(c) => Const(c.sin()),
            a => Sin(Box::new(a)),
        }
    }

    pub fn cos(self) -> ParamExpr {
        match self {
            Const(c) => Const(c.cos()),
            a => Cos(Box::new(a)),
        }
    }
}

impl From<f64> for ParamExpr {
    fn from(r: f64) -> Self {
        ParamExpr::real(r)
    }
}

impl From<Complex64> for ParamExpr {
    fn from(c: Complex64) -> Self {
        Const(c)
    }
}

fn fmt_real(r: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `{:?}` gives the shortest round-trip representation, possibly in
    // exponent form, which the grammar accepts.
    if r < 0.0 || (r == 0.0 && r.is_sign_negative()) {
        write!(f, "(-{:?})", -r)
    } else {
        write!(f, "{:?}", r)
    }
}

/// Fully parenthesized output that [`parse_expr`] reads back to a tree with
/// identical evaluation.
impl fmt::Display for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => {
                if c.im == 0.0 {
                    fmt_real(c.re, f)
                } else {
                    write!(f, "(")?;
                    fmt_real(c.re, f)?;
                    write!(f, "+")?;
                    fmt_real(c.im, f)?;
                    write!(f, "*i)")
                }
            }
            Param(k) => write!(f, "t{}", k + 1),
            Neg(a) => write!(f, "(-({a}))"),
            Add(a, b) => write!(f, "({a}+{b})"),
            Sub(a, b) => write!(f, "({a}-{b})"),
            Mul(a, b) => write!(f, "({a}*{b})"),
            Div(a, b) => write!(f, "({a}/{b})"),
            Pow(a, k) => write!(f, "(({a})^{k})"),
            Exp(a) => write!(f, "exp({a})"),
            Log(a) => write!(f, "log({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn const_and_param_evaluation() {
        let t = ParameterPoint::new(vec![c(2.0, -1.0)]);
        assert_eq!(ParamExpr::real(3.0).eval(&t).unwrap(), c(3.0, 0.0));
        assert_eq!(ParamExpr::param(1).eval(&t).unwrap(), c(2.0, -1.0));
    }

    #[test]
    fn log_exp_principal_branch() {
        let e = parse_expr("log(exp(1))", 0).unwrap();
        let v = e.eval(&ParameterPoint::empty()).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        // log(-1) = i*pi on the principal branch
        let e = parse_expr("log(-1)", 0).unwrap();
        let v = e.eval(&ParameterPoint::empty()).unwrap();
        assert!((v - c(0.0, std::f64::consts::PI)).norm() < 1e-15);
    }

    #[test]
    fn singular_evaluations() {
        let t = ParameterPoint::real(&[2.0]);
        for src in ["1/(t1-2)", "log(t1-2)", "(t1-2)^-2"] {
            let e = parse_expr(src, 1).unwrap();
            assert_eq!(e.eval(&t).unwrap_err().code(), "EVAL_SINGULAR", "{src}");
        }
    }

    #[test]
    fn short_parameter_point_is_an_arity_error() {
        let e = parse_expr("t2", 2).unwrap();
        let err = e.eval(&ParameterPoint::real(&[1.0])).unwrap_err();
        assert_eq!(err.code(), "PARAM_OUT_OF_RANGE");
    }

    #[test]
    fn display_of_negative_and_complex_constants_parses_back() {
        for v in [c(-1.5, 0.0), c(0.25, -3.0), c(-0.0, 1e-300), c(1e300, 2.0)] {
            let e = ParamExpr::Const(v);
            let back = parse_expr(&e.to_string(), 0).unwrap();
            assert_eq!(back.eval(&ParameterPoint::empty()).unwrap(), v, "{e}");
        }
    }

    #[test]
    fn substitute_replaces_parameter() {
        let e = parse_expr("t1*t2", 2).unwrap();
        let s = e.substitute(2, &ParamExpr::real(4.0));
        assert_eq!(s.eval(&ParameterPoint::real(&[3.0, 100.0])).unwrap(), c(12.0, 0.0));
    }
}
