//! Symmetric eigenvalues by cyclic Jacobi rotations, and the extremal
//! eigenvalue summary `(λ_inf(S_xx), λ_sup(S_yy))` of a payoff.

use super::{BoxDomain, ExtremalEigenvalues, Provenance};
use crate::error::CertifyError;
use crate::linalg::Matrix;
use crate::payoff::Payoff;
use crate::sample::halton_in_box;

const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAG_TARGET: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// All eigenvalues of a symmetric matrix, ascending. Cyclic Jacobi
/// rotations run until the off-diagonal Frobenius norm drops below
/// 1e-12 (or a sweep cap for badly scaled inputs). Non-symmetric input
/// (beyond 1e-9 entrywise) is rejected.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>, CertifyError> {
    if !m.is_square() {
        return Err(CertifyError::NotSymmetric {
            max_asym: f64::INFINITY,
        });
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(CertifyError::NotSymmetric { max_asym: asym });
    }
    let n = m.rows();
    if n == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    // symmetrize to halve rounding asymmetry before rotating
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)));

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() < OFF_DIAG_TARGET {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    // rotation angle underflow; 1/(2θ) avoids θ² overflow
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = akp - s * (akq + tau * akp);
                        let new_kq = akq + s * (akp - tau * akq);
                        a.set(k, p, new_kp);
                        a.set(p, k, new_kp);
                        a.set(k, q, new_kq);
                        a.set(q, k, new_kq);
                    }
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

/// Pointwise smallest eigenvalue of `S_xx` at `z`; `None` on evaluation
/// failure (domain errors while sampling are skipped by the caller).
fn lambda_min_xx(p: &Payoff, z: &[f64]) -> Option<f64> {
    let m = p.m();
    let hess = p.hessian(&z[..m], &z[m..]).ok()?;
    if !hess.s_xx.is_finite() {
        return None;
    }
    symmetric_eigenvalues(&hess.s_xx).ok().map(|e| e[0])
}

fn lambda_max_yy(p: &Payoff, z: &[f64]) -> Option<f64> {
    let m = p.m();
    let hess = p.hessian(&z[..m], &z[m..]).ok()?;
    if !hess.s_yy.is_finite() {
        return None;
    }
    symmetric_eigenvalues(&hess.s_yy)
        .ok()
        .map(|e| *e.last().unwrap())
}

const REFINE_SEEDS: usize = 10;
const REFINE_ITERATIONS: usize = 100;

/// Coordinate descent on a pointwise objective from the best sampled
/// seeds, constrained to the box: each iteration sweeps all coordinates
/// with ±step moves and the step halves whenever a sweep makes no
/// progress. `sign` = +1 minimizes, -1 maximizes.
fn refine(
    p: &Payoff,
    objective: impl Fn(&Payoff, &[f64]) -> Option<f64>,
    sign: f64,
    seeds: &[(f64, Vec<f64>)],
    box_: &BoxDomain,
) -> f64 {
    let mut best = seeds
        .iter()
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, |acc, v| acc.min(sign * v));
    let initial_step: Vec<f64> = box_
        .lower
        .iter()
        .zip(&box_.upper)
        .map(|(lo, hi)| (hi - lo) / 10.0)
        .collect();
    for (value, start) in seeds.iter().take(REFINE_SEEDS) {
        let mut z = start.clone();
        let mut current = sign * value;
        let mut step = initial_step.clone();
        for _ in 0..REFINE_ITERATIONS {
            let mut improved = false;
            for i in 0..z.len() {
                for dir in [1.0, -1.0] {
                    let mut cand = z.clone();
                    cand[i] = (cand[i] + dir * step[i]).clamp(box_.lower[i], box_.upper[i]);
                    if cand[i] == z[i] {
                        continue;
                    }
                    if let Some(v) = objective(p, &cand) {
                        let sv = sign * v;
                        if sv < current {
                            current = sv;
                            z = cand;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                for s in step.iter_mut() {
                    *s *= 0.5;
                }
            }
        }
        best = best.min(current);
    }
    sign * best
}

/// Extremal eigenvalues of the Hessian blocks: exact for the builtin
/// families, sampled over `box_` (Halton points plus coordinate-descent
/// refinement from the best seeds) for expressions. Sampled values are
/// one-sided estimates, recorded as such in the provenance.
pub fn extremal_eigenvalues(
    p: &Payoff,
    box_: &BoxDomain,
    samples: usize,
) -> Result<ExtremalEigenvalues, CertifyError> {
    assert!(samples >= 1, "need at least one sample");
    if let Some((lambda_inf, lambda_sup)) = p.analytic_extremal_eigenvalues() {
        return Ok(ExtremalEigenvalues {
            lambda_inf,
            lambda_sup,
            provenance: Provenance::Analytic,
        });
    }
    assert_eq!(box_.dim(), p.dim(), "box dimension must match payoff");

    let mut min_samples: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut max_samples: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut skipped = 0usize;
    for idx in 1..=samples {
        let z = halton_in_box(idx, &box_.lower, &box_.upper);
        match (lambda_min_xx(p, &z), lambda_max_yy(p, &z)) {
            (Some(lo), Some(hi)) => {
                min_samples.push((lo, z.clone()));
                max_samples.push((hi, z));
            }
            _ => skipped += 1,
        }
    }
    if min_samples.is_empty() {
        return Err(CertifyError::NoValidSamples { skipped });
    }
    min_samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    max_samples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let lambda_inf = refine(p, lambda_min_xx, 1.0, &min_samples, box_);
    let lambda_sup = refine(p, lambda_max_yy, -1.0, &max_samples, box_);

    Ok(ExtremalEigenvalues {
        lambda_inf,
        lambda_sup,
        provenance: Provenance::Sampled {
            box_: box_.clone(),
            samples,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{ExpressionPayoff, LienardPayoff, QuadraticPayoff};

    #[test]
    fn eigenvalues_of_small_matrices() {
        let d = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(symmetric_eigenvalues(&d).unwrap(), vec![1.0, 3.0]);

        let f = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = symmetric_eigenvalues(&f).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);

        let g = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigenvalues(&g).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_larger_matrix() {
        // eigenvalues of the 4x4 second-difference matrix: 2 - 2cos(kπ/5)
        let n = 4;
        let a = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let eigs = symmetric_eigenvalues(&a).unwrap();
        for (k, e) in eigs.iter().enumerate() {
            let expected = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 5.0).cos();
            assert!((e - expected).abs() < 1e-10, "eig {k}: {e} vs {expected}");
        }
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(CertifyError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn analytic_extremal_paths() {
        let q = Payoff::Quadratic(QuadraticPayoff::scalar(2.0, 2.0, 1.0));
        let box_ = BoxDomain::symmetric(2, 5.0);
        let eigs = extremal_eigenvalues(&q, &box_, 10).unwrap();
        assert_eq!(eigs.lambda_inf, 2.0);
        assert_eq!(eigs.lambda_sup, 1.0);
        assert_eq!(eigs.provenance, Provenance::Analytic);

        let l = Payoff::Lienard(LienardPayoff::new(1.0, 2.0).unwrap());
        let eigs = extremal_eigenvalues(&l, &box_, 10).unwrap();
        assert_eq!(eigs.lambda_inf, -1.0);
        assert_eq!(eigs.lambda_sup, -2.0);
    }

    #[test]
    fn sampled_path_on_constant_hessian_expression() {
        let p = Payoff::Expression(ExpressionPayoff::parse("x1^2/2 - y1^2/2", 1, 1).unwrap());
        let box_ = BoxDomain::symmetric(2, 5.0);
        let eigs = extremal_eigenvalues(&p, &box_, 1000).unwrap();
        assert!((eigs.lambda_inf - 1.0).abs() < 1e-9);
        assert!((eigs.lambda_sup + 1.0).abs() < 1e-9);
        assert!(matches!(eigs.provenance, Provenance::Sampled { .. }));
    }

    #[test]
    fn sampled_refinement_stays_in_box() {
        // S_xx = -x² is smallest at the box corners, so the refinement
        // must report the boundary value -25, not escape past it
        let p =
            Payoff::Expression(ExpressionPayoff::parse("-x1^4/12 + x1*y1 - y1^2/2", 1, 1).unwrap());
        let box_ = BoxDomain::symmetric(2, 5.0);
        let eigs = extremal_eigenvalues(&p, &box_, 500).unwrap();
        assert!(eigs.lambda_inf >= -25.0 - 1e-9, "{}", eigs.lambda_inf);
        assert!((eigs.lambda_inf + 25.0).abs() < 1e-6, "{}", eigs.lambda_inf);
        assert!((eigs.lambda_sup + 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_path_tracks_varying_hessian() {
        // S_xx = 2 + cos(x1) has infimum 1 at x1 = ±π within [-5,5]
        let p =
            Payoff::Expression(ExpressionPayoff::parse("x1^2 - cos(x1) - y1^2/2", 1, 1).unwrap());
        let box_ = BoxDomain::symmetric(2, 5.0);
        let eigs = extremal_eigenvalues(&p, &box_, 500).unwrap();
        assert!((eigs.lambda_inf - 1.0).abs() < 1e-4, "{}", eigs.lambda_inf);
        assert!((eigs.lambda_sup + 1.0).abs() < 1e-9);
    }
}
