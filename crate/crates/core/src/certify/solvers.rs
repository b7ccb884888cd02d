//! Inner optimization: the partial minimum `V(y) = min_x S(x, y)`, the
//! partial maximum `U(x) = max_y S(x, y)`, saddle search by alternating
//! the two, and minimax-equilibrium candidates by optimizing `V`/`U`.

use super::{Certificate, Theorem2Case};
use crate::certify::BoxDomain;
use crate::error::CertifyError;
use crate::linalg;
use crate::payoff::Payoff;
use crate::sample::halton_in_box;

pub const INNER_GRAD_TOL: f64 = 1e-10;
pub const INNER_MAX_ITERATIONS: usize = 100_000;
const ARMIJO_C: f64 = 1e-4;

/// `min_x S(x, y)` by gradient descent with backtracking line search from
/// `x = 0`, finished by Newton steps on the inner gradient once the line
/// search reaches the resolution of the payoff values. Requires strict
/// convexity in `x` (`λ_inf(S_xx) > 0`); the precondition is enforced
/// where analytic eigenvalues exist and otherwise surfaces as a
/// non-convergence error.
pub fn inner_min(p: &Payoff, y: &[f64]) -> Result<(f64, Vec<f64>), CertifyError> {
    if let Some((lambda_inf, _)) = p.analytic_extremal_eigenvalues() {
        if lambda_inf <= 0.0 {
            return Err(CertifyError::Precondition(format!(
                "inner_min needs lambda_inf(S_xx) > 0, got {lambda_inf}"
            )));
        }
    }
    assert_eq!(y.len(), p.n());
    line_search_extremize(
        p.m(),
        |x| p.eval(x, y).map_err(CertifyError::from),
        |x| p.grad(x, y).map(|(sx, _)| sx).map_err(CertifyError::from),
        |x| p.hessian(x, y).map(|h| h.s_xx).map_err(CertifyError::from),
        Direction::Minimize,
        "inner_min",
    )
}

/// `max_y S(x, y)`, the mirror of [`inner_min`]; requires strict
/// concavity in `y` (`λ_sup(S_yy) < 0`).
pub fn inner_max(p: &Payoff, x: &[f64]) -> Result<(f64, Vec<f64>), CertifyError> {
    if let Some((_, lambda_sup)) = p.analytic_extremal_eigenvalues() {
        if lambda_sup >= 0.0 {
            return Err(CertifyError::Precondition(format!(
                "inner_max needs lambda_sup(S_yy) < 0, got {lambda_sup}"
            )));
        }
    }
    assert_eq!(x.len(), p.m());
    line_search_extremize(
        p.n(),
        |y| p.eval(x, y).map_err(CertifyError::from),
        |y| p.grad(x, y).map(|(_, sy)| sy).map_err(CertifyError::from),
        |y| p.hessian(x, y).map(|h| h.s_yy).map_err(CertifyError::from),
        Direction::Maximize,
        "inner_max",
    )
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Minimize,
    Maximize,
}

/// Backtracking value differences lose meaning once they sink below the
/// rounding of `S`, which happens at gradient norms around
/// `sqrt(eps·|S|)`; from there Newton steps on the gradient finish the
/// job.
const LINE_SEARCH_GRAD_FLOOR: f64 = 1e-5;
const INNER_NEWTON_ITERATIONS: usize = 50;

/// Gradient descent/ascent with Armijo backtracking from the origin,
/// plus a Newton finish on the inner gradient using the definite Hessian
/// block.
fn line_search_extremize(
    dim: usize,
    value: impl Fn(&[f64]) -> Result<f64, CertifyError>,
    gradient: impl Fn(&[f64]) -> Result<Vec<f64>, CertifyError>,
    hessian: impl Fn(&[f64]) -> Result<crate::linalg::Matrix, CertifyError>,
    direction: Direction,
    what: &'static str,
) -> Result<(f64, Vec<f64>), CertifyError> {
    let sign = match direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    let mut point = vec![0.0; dim];
    let mut current = value(&point)?;
    let mut step = 1.0f64;
    let mut iterations = 0usize;
    'descent: while iterations < INNER_MAX_ITERATIONS {
        iterations += 1;
        let g = gradient(&point)?;
        let gnorm = linalg::norm(&g);
        if gnorm < INNER_GRAD_TOL {
            return Ok((current, point));
        }
        let scale = 1.0 + current.abs().sqrt();
        if gnorm < LINE_SEARCH_GRAD_FLOOR * scale {
            break 'descent;
        }
        // try expanding from the last accepted step, then backtrack
        let mut t = (step * 2.0).min(1e6);
        loop {
            let candidate = linalg::axpy(&point, sign * t, &g);
            // an Err means the step left the domain; shrink and retry
            if let Ok(v) = value(&candidate) {
                let sufficient = match direction {
                    Direction::Minimize => v <= current - ARMIJO_C * t * gnorm * gnorm,
                    Direction::Maximize => v >= current + ARMIJO_C * t * gnorm * gnorm,
                };
                if sufficient && v.is_finite() {
                    point = candidate;
                    current = v;
                    step = t;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-18 {
                // value differences drowned in rounding; hand over to the
                // Newton finish
                break 'descent;
            }
        }
    }

    // Newton on the inner gradient: quadratically convergent near the
    // extremum and immune to the value-resolution wall (the Hessian block
    // is definite under the solver preconditions, so the same step
    // formula serves both directions)
    let mut g = gradient(&point)?;
    for _ in 0..INNER_NEWTON_ITERATIONS {
        let gnorm = linalg::norm(&g);
        if gnorm < INNER_GRAD_TOL {
            return Ok((value(&point)?, point));
        }
        let h = hessian(&point)?;
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(delta) = linalg::solve(&h, &neg_g) else {
            break;
        };
        let candidate = linalg::axpy(&point, 1.0, &delta);
        let Ok(gc) = gradient(&candidate) else {
            break;
        };
        if linalg::norm(&gc) < gnorm {
            point = candidate;
            g = gc;
        } else {
            break;
        }
    }
    if linalg::norm(&g) < INNER_GRAD_TOL {
        return Ok((value(&point)?, point));
    }
    Err(CertifyError::NonConvergence {
        what,
        iterations: INNER_MAX_ITERATIONS,
    })
}

/// Closed-form `V(y) = min_x S(x, y)` where the family admits one;
/// `None` means use the iterative solver.
pub(crate) fn v_closed_form(
    p: &Payoff,
    y: &[f64],
) -> Option<Result<(f64, Vec<f64>), CertifyError>> {
    match p {
        Payoff::Quadratic(q) => {
            let (lambda_inf, _) = p.analytic_extremal_eigenvalues()?;
            if lambda_inf <= 0.0 {
                return Some(Err(CertifyError::Precondition(
                    "partial minimum undefined: S is not strictly convex in x".into(),
                )));
            }
            // x* solves A x = -B y
            let by = q.b().mul_vec(y);
            let neg_by: Vec<f64> = by.iter().map(|v| -v).collect();
            let x_star = linalg::solve(q.a(), &neg_by)?;
            let value = p.eval(&x_star, y).ok()?;
            Some(Ok((value, x_star)))
        }
        _ => None,
    }
}

/// Closed-form `U(x) = max_y S(x, y)` where available.
pub(crate) fn u_closed_form(
    p: &Payoff,
    x: &[f64],
) -> Option<Result<(f64, Vec<f64>), CertifyError>> {
    match p {
        Payoff::Quadratic(q) => {
            let (_, lambda_sup) = p.analytic_extremal_eigenvalues()?;
            if lambda_sup >= 0.0 {
                return Some(Err(CertifyError::Precondition(
                    "partial maximum undefined: S is not strictly concave in y".into(),
                )));
            }
            // y* solves C y = -Bᵀ x
            let btx = q.b().mul_vec_transposed(x);
            let neg_btx: Vec<f64> = btx.iter().map(|v| -v).collect();
            let y_star = linalg::solve(q.c(), &neg_btx)?;
            let value = p.eval(x, &y_star).ok()?;
            Some(Ok((value, y_star)))
        }
        Payoff::Lienard(l) => {
            if l.alpha() <= 0.0 {
                return Some(Err(CertifyError::Precondition(
                    "partial maximum undefined: alpha = 0 makes S linear in y".into(),
                )));
            }
            // y* = -x/α, U(x) = F(x) + x²/(2α)
            let x0 = x[0];
            let y_star = -x0 / l.alpha();
            let value = l.big_f(x0) + x0 * x0 / (2.0 * l.alpha());
            Some(Ok((value, vec![y_star])))
        }
        Payoff::Expression(_) => None,
    }
}

/// `V(y)` and its minimizer: closed form when available, otherwise the
/// iterative inner solver.
pub fn min_over_x(p: &Payoff, y: &[f64]) -> Result<(f64, Vec<f64>), CertifyError> {
    match v_closed_form(p, y) {
        Some(r) => r,
        None => inner_min(p, y),
    }
}

/// `U(x)` and its maximizer, mirror of [`min_over_x`].
pub fn max_over_y(p: &Payoff, x: &[f64]) -> Result<(f64, Vec<f64>), CertifyError> {
    match u_closed_form(p, x) {
        Some(r) => r,
        None => inner_max(p, x),
    }
}

pub const SADDLE_GRAD_TOL: f64 = 1e-10;
const SADDLE_MAX_ROUNDS: usize = 1000;

/// Saddle point by alternating the inner solvers from `y = 0` until the
/// joint gradient is stationary. Valid in the strictly convex-concave
/// regime (`λ_sup < 0 < λ_inf`), where at most one saddle exists.
pub fn find_saddle(p: &Payoff) -> Result<crate::dynamics::State, CertifyError> {
    let mut y = vec![0.0; p.n()];
    let mut x = vec![0.0; p.m()];
    for _ in 0..SADDLE_MAX_ROUNDS {
        x = inner_min(p, &y)?.1;
        y = inner_max(p, &x)?.1;
        let (sx, sy) = p.grad(&x, &y)?;
        let gnorm = (linalg::dot(&sx, &sx) + linalg::dot(&sy, &sy)).sqrt();
        if gnorm < SADDLE_GRAD_TOL {
            return Ok(crate::dynamics::State::new(x, y));
        }
    }
    Err(CertifyError::NonConvergence {
        what: "find_saddle",
        iterations: SADDLE_MAX_ROUNDS,
    })
}

/// A stationary candidate for a minimax equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxCandidate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `V(y)` in the max-min case, `U(x)` in the min-max case.
    pub value: f64,
    pub grad_norm: f64,
}

pub const STATIONARY_TOL: f64 = 1e-8;
/// Envelope values resolve stationarity only to ~sqrt(machine epsilon);
/// the outer solve stops here and a Newton polish on the full gradient
/// takes over.
const OUTER_GRAD_TOL: f64 = 1e-6;
const OUTER_MAX_ITERATIONS: usize = 10_000;
const NEWTON_POLISH_ITERATIONS: usize = 30;
const CLUSTER_TOL: f64 = 1e-6;

/// Minimax-equilibrium candidates for a certified payoff: case 1
/// maximizes `V(y)` (max-min), case 2 minimizes `U(x)` (min-max), both by
/// multi-start backtracking on the envelope gradient. Results are
/// clustered, checked stationary in the full gradient, and ordered best
/// value first.
pub fn minimax_candidates(
    p: &Payoff,
    cert: &Certificate,
    box_: &BoxDomain,
    starts: usize,
) -> Result<Vec<MinimaxCandidate>, CertifyError> {
    assert!(starts >= 1);
    let m = p.m();
    let case = cert.theorem2_case;
    if case == Theorem2Case::None {
        return Err(CertifyError::Precondition(
            "minimax candidates need a boundedness case (theorem2_case != none)".into(),
        ));
    }
    let (x_box, y_box) = box_.split(m);
    let mut found: Vec<MinimaxCandidate> = Vec::new();
    for idx in 1..=starts {
        let result = match case {
            Theorem2Case::Case1 => {
                let y0 = halton_in_box(idx, &y_box.lower, &y_box.upper);
                // ascend V(y); envelope gradient is S_y at (x*(y), y)
                outer_extremize(
                    y0,
                    |y| min_over_x(p, y).map(|(v, _)| v),
                    |y| {
                        let (_, x_star) = min_over_x(p, y)?;
                        p.grad(&x_star, y)
                            .map(|(_, sy)| sy)
                            .map_err(CertifyError::from)
                    },
                    Direction::Maximize,
                )
                .and_then(|(value, y_star)| {
                    let (_, x_star) = min_over_x(p, &y_star)?;
                    Ok((value, x_star, y_star))
                })
            }
            Theorem2Case::Case2 => {
                let x0 = halton_in_box(idx, &x_box.lower, &x_box.upper);
                outer_extremize(
                    x0,
                    |x| max_over_y(p, x).map(|(v, _)| v),
                    |x| {
                        let (_, y_star) = max_over_y(p, x)?;
                        p.grad(x, &y_star)
                            .map(|(sx, _)| sx)
                            .map_err(CertifyError::from)
                    },
                    Direction::Minimize,
                )
                .and_then(|(value, x_star)| {
                    let (_, y_star) = max_over_y(p, &x_star)?;
                    Ok((value, x_star, y_star))
                })
            }
            Theorem2Case::None => unreachable!(),
        };
        let (mut value, mut x, mut y) = result?;
        if let Some((zx, zy)) = newton_polish(p, &x, &y) {
            x = zx;
            y = zy;
            value = match case {
                Theorem2Case::Case1 => min_over_x(p, &y)?.0,
                _ => max_over_y(p, &x)?.0,
            };
        }
        let (sx, sy) = p.grad(&x, &y)?;
        let grad_norm = (linalg::dot(&sx, &sx) + linalg::dot(&sy, &sy)).sqrt();
        if grad_norm >= STATIONARY_TOL {
            continue; // outer solver stalled off-stationary; drop
        }
        let z: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        let duplicate = found.iter().any(|c| {
            let zc: Vec<f64> = c.x.iter().chain(c.y.iter()).copied().collect();
            linalg::dist(&z, &zc) < CLUSTER_TOL
        });
        if !duplicate {
            found.push(MinimaxCandidate {
                x,
                y,
                value,
                grad_norm,
            });
        }
    }
    if found.is_empty() {
        return Err(CertifyError::NonConvergence {
            what: "minimax_candidates",
            iterations: starts,
        });
    }
    // best value first; case 1 wants the maximum of V, case 2 the minimum of U
    found.sort_by(|a, b| {
        let ord = a.value.partial_cmp(&b.value).unwrap();
        match case {
            Theorem2Case::Case1 => ord.reverse(),
            _ => ord,
        }
        .then_with(|| a.x.partial_cmp(&b.x).unwrap())
    });
    Ok(found)
}

/// Newton iteration on the full gradient, keeping steps only while the
/// residual shrinks. Returns the sharpened point when it improves.
fn newton_polish(p: &Payoff, x: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = p.m();
    let mut z: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let grad_at = |z: &[f64]| -> Option<Vec<f64>> {
        let (sx, sy) = p.grad(&z[..m], &z[m..]).ok()?;
        let mut g = sx;
        g.extend(sy);
        Some(g)
    };
    let mut g = grad_at(&z)?;
    let mut improved = false;
    for _ in 0..NEWTON_POLISH_ITERATIONS {
        let gnorm = linalg::norm(&g);
        if gnorm < 1e-13 {
            break;
        }
        let hess = p.hessian(&z[..m], &z[m..]).ok()?.assemble_full();
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = linalg::solve(&hess, &neg_g)?;
        let cand = linalg::axpy(&z, 1.0, &delta);
        let gc = grad_at(&cand)?;
        if linalg::norm(&gc) < gnorm {
            z = cand;
            g = gc;
            improved = true;
        } else {
            break;
        }
    }
    improved.then(|| (z[..m].to_vec(), z[m..].to_vec()))
}

/// Backtracking line search on an envelope objective; same scheme as the
/// inner solvers but starting from a given point.
fn outer_extremize(
    start: Vec<f64>,
    value: impl Fn(&[f64]) -> Result<f64, CertifyError>,
    gradient: impl Fn(&[f64]) -> Result<Vec<f64>, CertifyError>,
    direction: Direction,
) -> Result<(f64, Vec<f64>), CertifyError> {
    let sign = match direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    let mut point = start;
    let mut current = value(&point)?;
    let mut step = 1.0f64;
    for _ in 0..OUTER_MAX_ITERATIONS {
        let g = gradient(&point)?;
        let gnorm = linalg::norm(&g);
        if gnorm < OUTER_GRAD_TOL {
            return Ok((current, point));
        }
        let mut t = (step * 2.0).min(1e6);
        loop {
            let candidate = linalg::axpy(&point, sign * t, &g);
            match value(&candidate) {
                Ok(v) if v.is_finite() => {
                    let ok = match direction {
                        Direction::Minimize => v <= current - ARMIJO_C * t * gnorm * gnorm,
                        Direction::Maximize => v >= current + ARMIJO_C * t * gnorm * gnorm,
                    };
                    if ok {
                        point = candidate;
                        current = v;
                        step = t;
                        break;
                    }
                }
                _ => {}
            }
            t *= 0.5;
            if t < 1e-18 {
                // flat to machine precision; accept as stalled-stationary
                return Ok((current, point));
            }
        }
    }
    Err(CertifyError::NonConvergence {
        what: "outer envelope solver",
        iterations: OUTER_MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{LienardPayoff, QuadraticPayoff};

    fn quad(a: f64, b: f64, c: f64) -> Payoff {
        Payoff::Quadratic(QuadraticPayoff::scalar(a, b, c))
    }

    #[test]
    fn inner_min_quadratic() {
        let p = quad(2.0, 2.0, 1.0);
        // x* = -b y / a, V = (c - b²/a) y²/2
        let (v, x) = inner_min(&p, &[1.0]).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-8, "x* = {}", x[0]);
        assert!((v + 0.5).abs() < 1e-9, "V = {v}");

        let (v, x) = inner_min(&p, &[0.0]).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_eq!(v, 0.0);

        let (v, x) = inner_min(&quad(2.0, 0.0, 1.0), &[3.0]).unwrap();
        assert!(x[0].abs() < 1e-9);
        assert!((v - 4.5).abs() < 1e-9);
    }

    #[test]
    fn inner_min_rejects_nonconvex() {
        assert!(matches!(
            inner_min(&quad(-1.0, 0.0, -1.0), &[1.0]),
            Err(CertifyError::Precondition(_))
        ));
    }

    #[test]
    fn inner_max_quadratic_and_lienard() {
        let p = quad(2.0, 2.0, -1.0);
        // y* = -b x / c = 2, U = (a - b²/c) x²/2 = 3 at x = 1
        let (u, y) = inner_max(&p, &[1.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-8);
        assert!((u - 3.0).abs() < 1e-9);

        let l = Payoff::Lienard(LienardPayoff::new(1.0, 2.0).unwrap());
        let (u, y) = inner_max(&l, &[0.0]).unwrap();
        assert!(y[0].abs() < 1e-9);
        assert!(u.abs() < 1e-12);

        // U(x) = F(x) + x²/(2α): F(2) = 16/12 - 2 = -2/3, so U(2) = 1/3
        let (u, y) = inner_max(&l, &[2.0]).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-8, "y* = {}", y[0]);
        assert!((u - 1.0 / 3.0).abs() < 1e-9, "U = {u}");
    }

    #[test]
    fn closed_forms_agree_with_solvers() {
        let p = quad(2.0, 2.0, 1.0);
        let (v_cf, x_cf) = v_closed_form(&p, &[1.5]).unwrap().unwrap();
        let (v_it, x_it) = inner_min(&p, &[1.5]).unwrap();
        assert!((v_cf - v_it).abs() < 1e-9);
        assert!((x_cf[0] - x_it[0]).abs() < 1e-7);

        let l = Payoff::Lienard(LienardPayoff::new(1.0, 2.0).unwrap());
        let (u_cf, y_cf) = u_closed_form(&l, &[2.0]).unwrap().unwrap();
        let (u_it, y_it) = inner_max(&l, &[2.0]).unwrap();
        assert!((u_cf - u_it).abs() < 1e-9);
        assert!((y_cf[0] - y_it[0]).abs() < 1e-7);
    }

    #[test]
    fn saddle_of_decoupled_quadratic() {
        let s = find_saddle(&quad(1.0, 0.0, -1.0)).unwrap();
        assert!(s.norm() < 1e-9);
        // coupling does not move the saddle of a centered quadratic
        let s = find_saddle(&quad(1.0, 3.0, -1.0)).unwrap();
        assert!(s.norm() < 1e-9);
    }
}
