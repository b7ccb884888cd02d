//! Payoff functions `S(x, y)`: built-in families with exact derivatives
//! and a parsed expression form differentiated by dual numbers.
//!
//! `x` holds the `m` descent variables, `y` the `n` ascent variables;
//! both sides must be non-empty. Every payoff exposes the value, the
//! gradient blocks `(S_x, S_y)` and the Hessian blocks
//! `(S_xx, S_yy, S_xy)`, with `S_yx = S_xyᵀ`.

mod dual;
pub mod expr;

use crate::error::{EvalError, InvalidPayoff};
use crate::linalg::Matrix;
pub use expr::ParseError;

use dual::{eval_expr, Dual, HyperDual};
use expr::Expr;

/// Hessian of `S` split into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    /// m×m block of second derivatives in `x`.
    pub s_xx: Matrix,
    /// n×n block of second derivatives in `y`.
    pub s_yy: Matrix,
    /// m×n mixed block; the y-then-x block is its transpose.
    pub s_xy: Matrix,
}

/// Central-difference derivative estimates from the oracle.
#[derive(Debug, Clone)]
pub struct FiniteDiffEstimate {
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub hessian: HessianBlocks,
}

impl HessianBlocks {
    /// The full (m+n)-square Hessian `[[S_xx, S_xy], [S_yx, S_yy]]`.
    pub fn assemble_full(&self) -> Matrix {
        let m = self.s_xx.rows();
        let n = self.s_yy.rows();
        Matrix::from_fn(m + n, m + n, |i, j| {
            if i < m && j < m {
                self.s_xx.get(i, j)
            } else if i >= m && j >= m {
                self.s_yy.get(i - m, j - m)
            } else if i < m {
                self.s_xy.get(i, j - m)
            } else {
                self.s_xy.get(j, i - m)
            }
        })
    }
}

/// `S = ½·xᵀAx + xᵀBy + ½·yᵀCy` with `A`, `C` symmetric.
///
/// For `m = n = 1` this is the scalar family `S = a·x²/2 + b·x·y + c·y²/2`.
/// Hessians are constant, so the extremal eigenvalues are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPayoff {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl QuadraticPayoff {
    /// Scalar form `S = a·x²/2 + b·x·y + c·y²/2`.
    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        QuadraticPayoff {
            a: Matrix::from_rows(&[vec![a]]),
            b: Matrix::from_rows(&[vec![b]]),
            c: Matrix::from_rows(&[vec![c]]),
        }
    }

    /// General form; `a` must be m×m symmetric, `c` n×n symmetric, `b` m×n.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, InvalidPayoff> {
        let m = a.rows();
        let n = c.rows();
        if m == 0 || n == 0 {
            return Err(InvalidPayoff::EmptySide { m, n });
        }
        if !a.is_square() {
            return Err(InvalidPayoff::Shape {
                which: "A",
                rows: m,
                cols: m,
            });
        }
        if !c.is_square() {
            return Err(InvalidPayoff::Shape {
                which: "C",
                rows: n,
                cols: n,
            });
        }
        if b.rows() != m || b.cols() != n {
            return Err(InvalidPayoff::Shape {
                which: "B",
                rows: m,
                cols: n,
            });
        }
        let asym_a = a.max_asymmetry();
        if asym_a > 1e-12 {
            return Err(InvalidPayoff::NonSymmetric {
                which: "A",
                max_asym: asym_a,
            });
        }
        let asym_c = c.max_asymmetry();
        if asym_c > 1e-12 {
            return Err(InvalidPayoff::NonSymmetric {
                which: "C",
                max_asym: asym_c,
            });
        }
        Ok(QuadraticPayoff { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
}

/// `S = F(x) - x·y + G(y)` with `F(x) = μ(x⁴/12 - x²/2)` and
/// `G(y) = -α·y²/2`, so `F' = f(x) = μ(x³/3 - x)` and `G' = g(y) = -α·y`.
///
/// Gradient descent-ascent on this payoff is `ẋ = y - f(x)`,
/// `ẏ = -x + g(y)`; at `α = 0` that is the van der Pol oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LienardPayoff {
    mu: f64,
    alpha: f64,
}

impl LienardPayoff {
    pub fn new(mu: f64, alpha: f64) -> Result<Self, InvalidPayoff> {
        for (name, value) in [("mu", mu), ("alpha", alpha)] {
            if !value.is_finite() {
                return Err(InvalidPayoff::NonFiniteParameter { name });
            }
            if value < 0.0 {
                return Err(InvalidPayoff::NegativeParameter { name, value });
            }
        }
        Ok(LienardPayoff { mu, alpha })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `F(x) = μ(x⁴/12 - x²/2)`.
    pub fn big_f(&self, x: f64) -> f64 {
        self.mu * (x.powi(4) / 12.0 - x * x / 2.0)
    }

    /// `f(x) = F'(x) = μ(x³/3 - x)`.
    pub fn f(&self, x: f64) -> f64 {
        self.mu * (x * x * x / 3.0 - x)
    }

    /// `f'(x) = μ(x² - 1)`.
    pub fn f_prime(&self, x: f64) -> f64 {
        self.mu * (x * x - 1.0)
    }

    /// `g(y) = -α·y`.
    pub fn g(&self, y: f64) -> f64 {
        -self.alpha * y
    }
}

/// A payoff parsed from expression text over `x1..xm`, `y1..yn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionPayoff {
    source: String,
    ast: Expr,
    m: usize,
    n: usize,
}

impl ExpressionPayoff {
    pub fn parse(source: &str, m: usize, n: usize) -> Result<Self, ParseError> {
        let ast = expr::parse(source, m, n)?;
        Ok(ExpressionPayoff {
            source: source.to_string(),
            ast,
            m,
            n,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }
}

/// A payoff function of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Quadratic(QuadraticPayoff),
    Lienard(LienardPayoff),
    Expression(ExpressionPayoff),
}

impl From<QuadraticPayoff> for Payoff {
    fn from(q: QuadraticPayoff) -> Self {
        Payoff::Quadratic(q)
    }
}
impl From<LienardPayoff> for Payoff {
    fn from(l: LienardPayoff) -> Self {
        Payoff::Lienard(l)
    }
}
impl From<ExpressionPayoff> for Payoff {
    fn from(e: ExpressionPayoff) -> Self {
        Payoff::Expression(e)
    }
}

impl Payoff {
    /// Number of descent variables.
    pub fn m(&self) -> usize {
        match self {
            Payoff::Quadratic(q) => q.a.rows(),
            Payoff::Lienard(_) => 1,
            Payoff::Expression(e) => e.m,
        }
    }

    /// Number of ascent variables.
    pub fn n(&self) -> usize {
        match self {
            Payoff::Quadratic(q) => q.c.rows(),
            Payoff::Lienard(_) => 1,
            Payoff::Expression(e) => e.n,
        }
    }

    pub fn dim(&self) -> usize {
        self.m() + self.n()
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) {
        assert_eq!(x.len(), self.m(), "x has wrong length");
        assert_eq!(y.len(), self.n(), "y has wrong length");
    }

    /// `S(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        self.check_dims(x, y);
        match self {
            Payoff::Quadratic(q) => {
                let ax = q.a.mul_vec(x);
                let by = q.b.mul_vec(y);
                let cy = q.c.mul_vec(y);
                Ok(0.5 * crate::linalg::dot(x, &ax)
                    + crate::linalg::dot(x, &by)
                    + 0.5 * crate::linalg::dot(y, &cy))
            }
            Payoff::Lienard(l) => {
                let (x, y) = (x[0], y[0]);
                Ok(l.big_f(x) - x * y - l.alpha * y * y / 2.0)
            }
            Payoff::Expression(e) => eval_expr(&e.ast, x, y),
        }
    }

    /// Gradient blocks `(S_x, S_y)`.
    pub fn grad(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        self.check_dims(x, y);
        match self {
            Payoff::Quadratic(q) => {
                // S_x = A x + B y, S_y = Bᵀ x + C y
                let mut sx = q.a.mul_vec(x);
                for (v, w) in sx.iter_mut().zip(q.b.mul_vec(y)) {
                    *v += w;
                }
                let mut sy = q.b.mul_vec_transposed(x);
                for (v, w) in sy.iter_mut().zip(q.c.mul_vec(y)) {
                    *v += w;
                }
                Ok((sx, sy))
            }
            Payoff::Lienard(l) => {
                let (x, y) = (x[0], y[0]);
                Ok((vec![l.f(x) - y], vec![-x + l.g(y)]))
            }
            Payoff::Expression(e) => {
                let m = e.m;
                let n = e.n;
                let mut sx = vec![0.0; m];
                let mut sy = vec![0.0; n];
                for k in 0..(m + n) {
                    let xs: Vec<Dual> = (0..m)
                        .map(|i| Dual::variable(x[i], if i == k { 1.0 } else { 0.0 }))
                        .collect();
                    let ys: Vec<Dual> = (0..n)
                        .map(|j| Dual::variable(y[j], if m + j == k { 1.0 } else { 0.0 }))
                        .collect();
                    let out = eval_expr(&e.ast, &xs, &ys)?;
                    if k < m {
                        sx[k] = out.d;
                    } else {
                        sy[k - m] = out.d;
                    }
                }
                Ok((sx, sy))
            }
        }
    }

    /// Hessian blocks `(S_xx, S_yy, S_xy)`. Blocks are exactly symmetric:
    /// the upper triangle is computed and mirrored.
    pub fn hessian(&self, x: &[f64], y: &[f64]) -> Result<HessianBlocks, EvalError> {
        self.check_dims(x, y);
        match self {
            Payoff::Quadratic(q) => Ok(HessianBlocks {
                s_xx: q.a.clone(),
                s_yy: q.c.clone(),
                s_xy: q.b.clone(),
            }),
            Payoff::Lienard(l) => Ok(HessianBlocks {
                s_xx: Matrix::from_rows(&[vec![l.f_prime(x[0])]]),
                s_yy: Matrix::from_rows(&[vec![-l.alpha]]),
                s_xy: Matrix::from_rows(&[vec![-1.0]]),
            }),
            Payoff::Expression(e) => {
                let m = e.m;
                let n = e.n;
                let d = m + n;
                let mut full = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in i..d {
                        let xs: Vec<HyperDual> = (0..m)
                            .map(|k| {
                                HyperDual::variable(
                                    x[k],
                                    if k == i { 1.0 } else { 0.0 },
                                    if k == j { 1.0 } else { 0.0 },
                                )
                            })
                            .collect();
                        let ys: Vec<HyperDual> = (0..n)
                            .map(|k| {
                                HyperDual::variable(
                                    y[k],
                                    if m + k == i { 1.0 } else { 0.0 },
                                    if m + k == j { 1.0 } else { 0.0 },
                                )
                            })
                            .collect();
                        let out = eval_expr(&e.ast, &xs, &ys)?;
                        full.set(i, j, out.d12);
                        full.set(j, i, out.d12);
                    }
                }
                Ok(HessianBlocks {
                    s_xx: Matrix::from_fn(m, m, |i, j| full.get(i, j)),
                    s_yy: Matrix::from_fn(n, n, |i, j| full.get(m + i, m + j)),
                    s_xy: Matrix::from_fn(m, n, |i, j| full.get(i, m + j)),
                })
            }
        }
    }

    /// Central-difference estimates of the gradient and Hessian blocks;
    /// test oracle for the exact paths above. The Hessian estimate is
    /// formed entry by entry without mirroring, so its asymmetry is a
    /// measurable quantity.
    pub fn finite_diff_oracle(
        &self,
        x: &[f64],
        y: &[f64],
        h: f64,
    ) -> Result<FiniteDiffEstimate, EvalError> {
        assert!(h > 0.0, "step must be positive");
        self.check_dims(x, y);
        let m = self.m();
        let n = self.n();
        let d = m + n;
        let z0: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        let eval_at = |z: &[f64]| self.eval(&z[..m], &z[m..]);

        let shift = |mut z: Vec<f64>, i: usize, s: f64| {
            z[i] += s;
            z
        };

        let mut grad = vec![0.0; d];
        for (i, slot) in grad.iter_mut().enumerate() {
            let fp = eval_at(&shift(z0.clone(), i, h))?;
            let fm = eval_at(&shift(z0.clone(), i, -h))?;
            *slot = (fp - fm) / (2.0 * h);
        }

        let f0 = eval_at(&z0)?;
        let mut hess = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let v = if i == j {
                    let fp = eval_at(&shift(z0.clone(), i, h))?;
                    let fm = eval_at(&shift(z0.clone(), i, -h))?;
                    (fp - 2.0 * f0 + fm) / (h * h)
                } else {
                    let fpp = eval_at(&shift(shift(z0.clone(), i, h), j, h))?;
                    let fpm = eval_at(&shift(shift(z0.clone(), i, h), j, -h))?;
                    let fmp = eval_at(&shift(shift(z0.clone(), i, -h), j, h))?;
                    let fmm = eval_at(&shift(shift(z0.clone(), i, -h), j, -h))?;
                    (fpp - fpm - fmp + fmm) / (4.0 * h * h)
                };
                hess.set(i, j, v);
            }
        }

        Ok(FiniteDiffEstimate {
            grad_x: grad[..m].to_vec(),
            grad_y: grad[m..].to_vec(),
            hessian: HessianBlocks {
                s_xx: Matrix::from_fn(m, m, |i, j| hess.get(i, j)),
                s_yy: Matrix::from_fn(n, n, |i, j| hess.get(m + i, m + j)),
                s_xy: Matrix::from_fn(m, n, |i, j| hess.get(i, m + j)),
            },
        })
    }

    /// Exact `(λ_inf(S_xx), λ_sup(S_yy))` when the family admits them:
    /// constant Hessians for quadratics, `(-μ, -α)` for the Liénard
    /// family. Expressions return `None` and must be sampled.
    pub fn analytic_extremal_eigenvalues(&self) -> Option<(f64, f64)> {
        match self {
            Payoff::Quadratic(q) => {
                let eig_a = crate::certify::symmetric_eigenvalues(&q.a).ok()?;
                let eig_c = crate::certify::symmetric_eigenvalues(&q.c).ok()?;
                Some((eig_a[0], *eig_c.last().unwrap()))
            }
            Payoff::Lienard(l) => Some((-l.mu, -l.alpha)),
            Payoff::Expression(_) => None,
        }
    }
}
