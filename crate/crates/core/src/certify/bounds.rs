//! Radial-unboundedness probing, global curvature-bound verification, and
//! the convex-concave distance-monotonicity check.

use super::{ExtremalEigenvalues, ProbeVerdict, RadialProbeSummary};
use crate::certify::solvers::min_over_x;
use crate::certify::BoxDomain;
use crate::dynamics::{State, Trajectory};
use crate::error::CertifyError;
use crate::linalg;
use crate::payoff::Payoff;
use crate::sample::SplitMix64;

/// Default radius schedule for radial probes.
pub const DEFAULT_RADII: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Probes whether `f` grows without bound along rays from the origin.
/// The first `2·dim` rays are the ± coordinate axes; the rest are
/// seed-deterministic random directions. A ray passes when the value at
/// the last radius exceeds both the value at the previous radius and
/// `f(0) + 1`. A failing ray makes the verdict "not established" — the
/// probe can refute, never prove.
pub fn radial_probe(
    f: impl Fn(&[f64]) -> Result<f64, CertifyError>,
    dim: usize,
    rays: usize,
    radii: &[f64],
    seed: u64,
) -> Result<RadialProbeSummary, CertifyError> {
    assert!(rays >= 2 * dim, "need at least the 2·dim axis rays");
    assert!(
        radii.len() >= 2 && radii.windows(2).all(|w| w[1] > w[0]),
        "radii must be increasing with at least two stages"
    );
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(rays);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[i] = sign;
            directions.push(d);
        }
    }
    let mut rng = SplitMix64::new(seed);
    while directions.len() < rays {
        directions.push(rng.unit_direction(dim));
    }

    let origin_value = f(&vec![0.0; dim])?;
    for d in &directions {
        let mut values = Vec::with_capacity(radii.len());
        for &r in radii {
            let point: Vec<f64> = d.iter().map(|c| c * r).collect();
            values.push(f(&point)?);
        }
        let last = values[values.len() - 1];
        let prev = values[values.len() - 2];
        if !(last > prev && last > origin_value + 1.0) {
            return Ok(RadialProbeSummary {
                target: String::new(),
                verdict: ProbeVerdict::NotEstablished,
                rays,
                failing_ray: Some(d.clone()),
            });
        }
    }
    Ok(RadialProbeSummary {
        target: String::new(),
        verdict: ProbeVerdict::Consistent,
        rays,
        failing_ray: None,
    })
}

/// Violation statistics for one family of inequalities.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InequalityStats {
    pub checks: usize,
    pub violations: usize,
    /// Smallest `lhs - rhs` margin observed; negative values within slack
    /// are rounding, beyond slack they count as violations.
    pub worst_margin: f64,
}

impl InequalityStats {
    fn new() -> Self {
        InequalityStats {
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        let margin = lhs - rhs;
        let slack = LEMMA_SLACK * (1.0 + lhs.abs().max(rhs.abs()));
        self.checks += 1;
        if margin < -slack {
            self.violations += 1;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
    }
}

pub const LEMMA_SLACK: f64 = 1e-9;

/// Sampled verification of the global curvature bounds behind the
/// boundedness proofs, at one random `y` slice.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GlobalBoundsReport {
    pub pairs: usize,
    pub lambda_inf: f64,
    pub y: Vec<f64>,
    /// `S(x,y) ≥ S(a,y) + S_x(a,y)ᵀ(x-a) + λ_inf|x-a|²/2`.
    pub quadratic_lower_bound: InequalityStats,
    /// `|S_x(x,y) - S_x(a,y)| ≥ λ_inf|x-a|`; needs `λ_inf > 0`.
    pub gradient_growth: Option<InequalityStats>,
    /// `S(a,y) ≤ V(y) + |S_x(a,y)|²/(2λ_inf)`; needs `λ_inf > 0`.
    pub value_gradient_bound_base: Option<InequalityStats>,
    /// Same bound evaluated at the probe point `x`.
    pub value_gradient_bound_probe: Option<InequalityStats>,
}

impl GlobalBoundsReport {
    pub fn total_violations(&self) -> usize {
        self.quadratic_lower_bound.violations
            + [
                &self.gradient_growth,
                &self.value_gradient_bound_base,
                &self.value_gradient_bound_probe,
            ]
            .iter()
            .filter_map(|s| s.as_ref())
            .map(|s| s.violations)
            .sum::<usize>()
    }
}

/// Checks the quadratic lower bound at `pairs` random `(x, a)` pairs in
/// the box, at one random `y`; when `λ_inf > 0` additionally checks the
/// gradient-growth and value-gradient bounds (the latter against the
/// actual partial minimum `V(y)`).
pub fn verify_global_bounds(
    p: &Payoff,
    eigs: &ExtremalEigenvalues,
    pairs: usize,
    box_: &BoxDomain,
    seed: u64,
) -> Result<GlobalBoundsReport, CertifyError> {
    assert!(pairs >= 1);
    assert_eq!(box_.dim(), p.dim());
    let m = p.m();
    let lambda_inf = eigs.lambda_inf;
    let (x_box, y_box) = box_.split(m);
    let mut rng = SplitMix64::new(seed);
    let y = rng.in_box(&y_box.lower, &y_box.upper);

    let convex = lambda_inf > 0.0;
    let v_y = if convex {
        Some(min_over_x(p, &y)?.0)
    } else {
        None
    };

    let mut lemma1 = InequalityStats::new();
    let mut lemma2 = InequalityStats::new();
    let mut lemma3_base = InequalityStats::new();
    let mut lemma3_probe = InequalityStats::new();

    for _ in 0..pairs {
        let x = rng.in_box(&x_box.lower, &x_box.upper);
        let a = rng.in_box(&x_box.lower, &x_box.upper);
        let s_x = p.eval(&x, &y)?;
        let s_a = p.eval(&a, &y)?;
        let (grad_a, _) = p.grad(&a, &y)?;
        let diff = linalg::sub(&x, &a);
        let dist = linalg::norm(&diff);

        let taylor = s_a + linalg::dot(&grad_a, &diff) + lambda_inf * dist * dist / 2.0;
        lemma1.record(s_x, taylor);

        if convex {
            let (grad_x, _) = p.grad(&x, &y)?;
            let grad_gap = linalg::dist(&grad_x, &grad_a);
            lemma2.record(grad_gap, lambda_inf * dist);

            let v = v_y.unwrap();
            let ga = linalg::norm(&grad_a);
            lemma3_base.record(v + ga * ga / (2.0 * lambda_inf), s_a);
            let gx = linalg::norm(&grad_x);
            lemma3_probe.record(v + gx * gx / (2.0 * lambda_inf), s_x);
        }
    }

    Ok(GlobalBoundsReport {
        pairs,
        lambda_inf,
        y,
        quadratic_lower_bound: lemma1,
        gradient_growth: convex.then_some(lemma2),
        value_gradient_bound_base: convex.then_some(lemma3_base),
        value_gradient_bound_probe: convex.then_some(lemma3_probe),
    })
}

pub const DISTANCE_SLACK: f64 = 1e-7;
pub const SADDLE_CHECKS: usize = 100;

/// Result of the saddle-distance monotonicity check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SaddleDistanceReport {
    /// `½|z(t) - z*|²` nonincreasing along the trajectory within
    /// `1e-7·(1 + D)` slack.
    pub distance_monotone: bool,
    /// Largest increase between consecutive samples beyond slack.
    pub max_violation: f64,
    /// Saddle inequality `S(x*, y) ≤ S(x*, y*) ≤ S(x, y*)` held at all
    /// spot-check samples.
    pub saddle_inequality_ok: bool,
    pub spot_checks: usize,
}

/// In the strictly convex-concave regime the squared distance to the
/// saddle is itself a Lyapunov function; this checks it along a recorded
/// trajectory and spot-checks the defining saddle inequality at random
/// points around the trajectory's extent.
pub fn kose_uzawa_check(
    p: &Payoff,
    traj: &Trajectory,
    saddle: &State,
    seed: u64,
) -> Result<SaddleDistanceReport, CertifyError> {
    if let Some((lambda_inf, lambda_sup)) = p.analytic_extremal_eigenvalues() {
        if !(lambda_sup < 0.0 && lambda_inf > 0.0) {
            return Err(CertifyError::Precondition(format!(
                "kose_uzawa_check needs lambda_sup < 0 < lambda_inf, got ({lambda_inf}, {lambda_sup})"
            )));
        }
    }
    let z_star = saddle.z();
    let mut monotone = true;
    let mut max_violation = 0.0f64;
    let mut prev: Option<f64> = None;
    for pt in &traj.points {
        let d = 0.5 * linalg::dist(&pt.state.z(), &z_star).powi(2);
        if let Some(d_prev) = prev {
            let slack = DISTANCE_SLACK * (1.0 + d_prev.abs());
            if d > d_prev + slack {
                monotone = false;
                max_violation = max_violation.max(d - d_prev);
            }
        }
        prev = Some(d);
    }

    let half_width = (2.0 * traj.diameter()).max(1.0);
    let m = p.m();
    let mut rng = SplitMix64::new(seed);
    let s_star = p.eval(&saddle.x, &saddle.y)?;
    let mut inequality_ok = true;
    for _ in 0..SADDLE_CHECKS {
        let x: Vec<f64> = saddle
            .x
            .iter()
            .map(|c| rng.in_range(c - half_width, c + half_width))
            .collect();
        let y: Vec<f64> = saddle
            .y
            .iter()
            .map(|c| rng.in_range(c - half_width, c + half_width))
            .collect();
        let left = p.eval(&saddle.x, &y)?;
        let right = p.eval(&x, &saddle.y)?;
        let slack = LEMMA_SLACK * (1.0 + s_star.abs().max(left.abs()).max(right.abs()));
        if left > s_star + slack || s_star > right + slack {
            inequality_ok = false;
        }
    }
    let _ = m;

    Ok(SaddleDistanceReport {
        distance_monotone: monotone,
        max_violation,
        saddle_inequality_ok: inequality_ok,
        spot_checks: SADDLE_CHECKS,
    })
}
