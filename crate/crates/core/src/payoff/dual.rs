//! Forward-mode differentiation over expression trees.
//!
//! First derivatives use dual numbers; second derivatives use hyper-dual
//! numbers carrying two independent first-order parts and one mixed part,
//! so a single sweep yields one exact Hessian entry. No finite differences
//! anywhere on this path.

use super::expr::{Expr, VarSide};
use crate::error::EvalError;

/// Scalar type the evaluator is generic over.
pub(crate) trait Ad: Copy {
    fn constant(v: f64) -> Self;
    /// Real (value) part, used for domain checks.
    fn re(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    /// Applies a scalar function given value, first and second derivative
    /// at the real part.
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self;
}

impl Ad for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn lift(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }
}

/// Value plus one directional derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual {
    pub re: f64,
    pub d: f64,
}

impl Dual {
    pub fn variable(v: f64, seed: f64) -> Self {
        Dual { re: v, d: seed }
    }
}

impl Ad for Dual {
    fn constant(v: f64) -> Self {
        Dual { re: v, d: 0.0 }
    }
    fn re(self) -> f64 {
        self.re
    }
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            d: self.d + o.d,
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            d: self.d - o.d,
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            re: self.re * o.re,
            d: self.d * o.re + self.re * o.d,
        }
    }
    fn div(self, o: Self) -> Self {
        Dual {
            re: self.re / o.re,
            d: (self.d * o.re - self.re * o.d) / (o.re * o.re),
        }
    }
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            d: -self.d,
        }
    }
    fn lift(self, f: f64, df: f64, _d2f: f64) -> Self {
        Dual {
            re: f,
            d: df * self.d,
        }
    }
}

/// Value, two independent first-order parts, and the mixed second-order
/// part; evaluating with seeds `eᵢ`, `eⱼ` produces `∂²f/∂zᵢ∂zⱼ` in `d12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HyperDual {
    pub re: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub fn variable(v: f64, seed1: f64, seed2: f64) -> Self {
        HyperDual {
            re: v,
            d1: seed1,
            d2: seed2,
            d12: 0.0,
        }
    }
}

impl Ad for HyperDual {
    fn constant(v: f64) -> Self {
        HyperDual {
            re: v,
            d1: 0.0,
            d2: 0.0,
            d12: 0.0,
        }
    }
    fn re(self) -> f64 {
        self.re
    }
    fn add(self, o: Self) -> Self {
        HyperDual {
            re: self.re + o.re,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d12: self.d12 + o.d12,
        }
    }
    fn sub(self, o: Self) -> Self {
        HyperDual {
            re: self.re - o.re,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d12: self.d12 - o.d12,
        }
    }
    fn mul(self, o: Self) -> Self {
        HyperDual {
            re: self.re * o.re,
            d1: self.d1 * o.re + self.re * o.d1,
            d2: self.d2 * o.re + self.re * o.d2,
            d12: self.d12 * o.re + self.d1 * o.d2 + self.d2 * o.d1 + self.re * o.d12,
        }
    }
    fn div(self, o: Self) -> Self {
        // a / b = a * (1/b); 1/u lifted with derivatives -1/u², 2/u³
        let u = o.re;
        let inv = o.lift(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u));
        self.mul(inv)
    }
    fn neg(self) -> Self {
        HyperDual {
            re: -self.re,
            d1: -self.d1,
            d2: -self.d2,
            d12: -self.d12,
        }
    }
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual {
            re: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: d2f * self.d1 * self.d2 + df * self.d12,
        }
    }
}

/// Power with a constant exponent, with the zero-coefficient cases kept
/// away from `0^negative` so they do not manufacture `0 * inf`.
fn pow_parts(u: f64, k: f64) -> (f64, f64, f64) {
    let f = u.powf(k);
    let df = if k == 0.0 { 0.0 } else { k * u.powf(k - 1.0) };
    let d2f = if k == 0.0 || k == 1.0 {
        0.0
    } else {
        k * (k - 1.0) * u.powf(k - 2.0)
    };
    (f, df, d2f)
}

/// Evaluates an expression over any `Ad` scalar with domain checks on the
/// real part.
pub(crate) fn eval_expr<T: Ad>(e: &Expr, xs: &[T], ys: &[T]) -> Result<T, EvalError> {
    match e {
        Expr::Const(v) => Ok(T::constant(*v)),
        Expr::Var(VarSide::X, i) => Ok(xs[*i]),
        Expr::Var(VarSide::Y, i) => Ok(ys[*i]),
        Expr::Neg(a) => Ok(eval_expr(a, xs, ys)?.neg()),
        Expr::Add(a, b) => Ok(eval_expr(a, xs, ys)?.add(eval_expr(b, xs, ys)?)),
        Expr::Sub(a, b) => Ok(eval_expr(a, xs, ys)?.sub(eval_expr(b, xs, ys)?)),
        Expr::Mul(a, b) => Ok(eval_expr(a, xs, ys)?.mul(eval_expr(b, xs, ys)?)),
        Expr::Div(a, b) => {
            let num = eval_expr(a, xs, ys)?;
            let den = eval_expr(b, xs, ys)?;
            if den.re() == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(num.div(den))
        }
        Expr::Pow(a, k) => {
            let base = eval_expr(a, xs, ys)?;
            let u = base.re();
            if u < 0.0 && k.fract() != 0.0 {
                return Err(EvalError::PowDomain {
                    base: u,
                    exponent: *k,
                });
            }
            if u == 0.0 && *k < 0.0 {
                return Err(EvalError::PowZeroBase { exponent: *k });
            }
            let (f, df, d2f) = pow_parts(u, *k);
            Ok(base.lift(f, df, d2f))
        }
        Expr::Sin(a) => {
            let v = eval_expr(a, xs, ys)?;
            let u = v.re();
            Ok(v.lift(u.sin(), u.cos(), -u.sin()))
        }
        Expr::Cos(a) => {
            let v = eval_expr(a, xs, ys)?;
            let u = v.re();
            Ok(v.lift(u.cos(), -u.sin(), -u.cos()))
        }
        Expr::Exp(a) => {
            let v = eval_expr(a, xs, ys)?;
            let f = v.re().exp();
            Ok(v.lift(f, f, f))
        }
        Expr::Log(a) => {
            let v = eval_expr(a, xs, ys)?;
            let u = v.re();
            if u <= 0.0 {
                return Err(EvalError::LogDomain { arg: u });
            }
            Ok(v.lift(u.ln(), 1.0 / u, -1.0 / (u * u)))
        }
    }
}
