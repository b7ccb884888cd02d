//! Trajectory classification and steady-state search.
//!
//! The verdict precedence is total: a blow-up or non-finite abort is
//! Diverged; otherwise a trailing window of near-zero field norms is
//! Converged; otherwise a recurrence pair with real transport speed is
//! BoundedNonConvergent (a periodic-orbit candidate); anything else is
//! Undetermined. Undetermined is a first-class outcome for horizons that
//! end near a bifurcation boundary.

use crate::dynamics::{vector_field, State, StopReason, Trajectory};
use crate::linalg::{self, Matrix};
use crate::payoff::Payoff;
use crate::sample::halton_in_box;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Thresholds for the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Steady-state field-norm threshold.
    pub eps_ss: f64,
    /// Trailing sample count that must all sit below `eps_ss`.
    pub window: usize,
    /// Recurrence distance threshold as a fraction of the trajectory
    /// diameter.
    pub eps_ret: f64,
    /// Minimum mean transport speed along a recurrence loop.
    pub v_min: f64,
    /// Fraction of the trajectory discarded before the recurrence search.
    pub transient_frac: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            eps_ss: 1e-8,
            window: 50,
            eps_ret: 1e-4,
            v_min: 1e-3,
            transient_frac: 0.5,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps_ss > 0.0) {
            return Err("eps_ss must be > 0".into());
        }
        if self.window == 0 {
            return Err("window must be >= 1".into());
        }
        if !(self.eps_ret > 0.0) {
            return Err("eps_ret must be > 0".into());
        }
        if !(self.v_min > 0.0) {
            return Err("v_min must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.transient_frac) {
            return Err("transient_frac must be in [0, 1)".into());
        }
        Ok(())
    }
}

/// Final label for a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Converged { point: Vec<f64> },
    BoundedNonConvergent { period: f64 },
    Diverged,
    Undetermined,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged { .. } => "Converged",
            Verdict::BoundedNonConvergent { .. } => "BoundedNonConvergent",
            Verdict::Diverged => "Diverged",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

/// What backed the verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    FinalGradientNorm(f64),
    Recurrence { t1: f64, t2: f64, distance: f64 },
    Blowup { radius: f64, t: f64 },
    NonFinite { t: f64, detail: String },
    Horizon { note: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Classifies one recorded trajectory.
pub fn classify_trajectory(
    p: &Payoff,
    traj: &Trajectory,
    cfg: &ClassifierConfig,
) -> Classification {
    cfg.validate().expect("invalid classifier config");
    assert!(!traj.points.is_empty(), "trajectory must be nonempty");

    match &traj.stop {
        StopReason::Blowup { radius, t } => {
            return Classification {
                verdict: Verdict::Diverged,
                evidence: Evidence::Blowup {
                    radius: *radius,
                    t: *t,
                },
            };
        }
        StopReason::NonFinite { t, detail } => {
            return Classification {
                verdict: Verdict::Diverged,
                evidence: Evidence::NonFinite {
                    t: *t,
                    detail: detail.clone(),
                },
            };
        }
        StopReason::Horizon => {}
    }

    // Converged: every point of the trailing window has a tiny field norm
    if traj.points.len() >= cfg.window {
        let tail = &traj.points[traj.points.len() - cfg.window..];
        let mut all_small = true;
        let mut final_norm = 0.0;
        for pt in tail {
            let norm = match vector_field(p, &pt.state) {
                Ok(v) => linalg::norm(&v),
                Err(_) => {
                    all_small = false;
                    break;
                }
            };
            final_norm = norm;
            if norm >= cfg.eps_ss {
                all_small = false;
                break;
            }
        }
        if all_small {
            return Classification {
                verdict: Verdict::Converged {
                    point: traj.last_state().z(),
                },
                evidence: Evidence::FinalGradientNorm(final_norm),
            };
        }
    }

    if let Some((t1, t2, distance)) = find_recurrence(traj, cfg) {
        return Classification {
            verdict: Verdict::BoundedNonConvergent { period: t2 - t1 },
            evidence: Evidence::Recurrence { t1, t2, distance },
        };
    }

    Classification {
        verdict: Verdict::Undetermined,
        evidence: Evidence::Horizon {
            note: "horizon reached without a steady window or recurrence".into(),
        },
    }
}

/// Nearest-return search on the post-transient samples, grid-bucketed by
/// position to stay near-linear. Raw sample distances are only candidate
/// selectors; each candidate return is refined against the cubic Hermite
/// interpolant of the recorded (position, velocity) data, so the reported
/// distance is the actual miss distance of the orbit and the period is
/// resolved well below the sampling interval. Returns `(t1, t2, distance)`.
fn find_recurrence(traj: &Trajectory, cfg: &ClassifierConfig) -> Option<(f64, f64, f64)> {
    let points = &traj.points;
    let start = ((points.len() as f64) * cfg.transient_frac).floor() as usize;
    let tail = &points[start..];
    if tail.len() < 8 {
        return None;
    }
    let diameter = traj.diameter();
    if diameter <= 0.0 {
        return None;
    }
    let eps = cfg.eps_ret * diameter;

    let dts: Vec<f64> = tail.windows(2).map(|w| w[1].t - w[0].t).collect();
    let mut sorted_dts = dts.clone();
    sorted_dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_dt = sorted_dts[sorted_dts.len() / 2];
    let min_gap_t = 10.0 * median_dt;

    let dim = tail[0].state.z().len();
    let cell_size = diameter / 32.0;
    let cell_of =
        |z: &[f64]| -> Vec<i64> { z.iter().map(|v| (v / cell_size).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();

    // cumulative arc length, so loop transport speeds are O(1) lookups
    let mut cum_arc = Vec::with_capacity(tail.len());
    cum_arc.push(0.0);
    for w in tail.windows(2) {
        let step = linalg::dist(&w[0].state.z(), &w[1].state.z());
        cum_arc.push(cum_arc.last().unwrap() + step);
    }

    // for each sample, its nearest earlier neighbor at a real time gap
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (j, pt) in tail.iter().enumerate() {
        let z = pt.state.z();
        let cell = cell_of(&z);
        let mut nearest: Option<(usize, f64)> = None;
        let mut scratch = vec![0i64; dim];
        visit_neighbors(&cell, 0, &mut scratch, &mut |c: &Vec<i64>| {
            if let Some(indices) = buckets.get(c) {
                for &i in indices {
                    if pt.t - tail[i].t < min_gap_t {
                        continue;
                    }
                    let d = linalg::dist(&z, &tail[i].state.z());
                    if nearest.is_none_or(|(_, best)| d < best) {
                        nearest = Some((i, d));
                    }
                }
            }
        });
        buckets.entry(cell).or_default().push(j);
        if let Some((i, d)) = nearest {
            if d < diameter / 8.0 {
                candidates.push((i, j, d));
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }

    // refine each candidate against the interpolated curve around j
    let mut accepted: Vec<(f64, f64, f64)> = Vec::new(); // (t1, t2*, d*)
    for (i, j, _raw) in candidates {
        if j == 0 || j + 1 >= tail.len() {
            continue;
        }
        let z_ref = tail[i].state.z();
        let mut best = (f64::INFINITY, tail[j].t);
        for seg in [j - 1, j] {
            let (d, t) = min_distance_on_segment(&tail[seg], &tail[seg + 1], &z_ref);
            if d < best.0 {
                best = (d, t);
            }
        }
        let (d_star, t_star) = best;
        if d_star >= eps {
            continue;
        }
        // mean transport speed over the loop must clear v_min
        let arc = cum_arc[j] - cum_arc[i];
        let gap = t_star - tail[i].t;
        if gap <= 0.0 || arc / (tail[j].t - tail[i].t) < cfg.v_min {
            continue;
        }
        accepted.push((tail[i].t, t_star, d_star));
    }
    if accepted.is_empty() {
        return None;
    }

    // fundamental period: smallest gap among accepted returns, then the
    // tightest pair within 20% of it
    let min_gap = accepted
        .iter()
        .map(|(t1, t2, _)| t2 - t1)
        .fold(f64::INFINITY, f64::min);
    accepted
        .into_iter()
        .filter(|(t1, t2, _)| (t2 - t1) <= 1.2 * min_gap)
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
}

/// Minimum distance from `z_ref` to the cubic Hermite interpolant between
/// two recorded points: dense scan plus a parabola fit on the squared
/// distance. Returns `(distance, t)` at the minimum.
fn min_distance_on_segment(
    a: &crate::dynamics::TrajectoryPoint,
    b: &crate::dynamics::TrajectoryPoint,
    z_ref: &[f64],
) -> (f64, f64) {
    let h = b.t - a.t;
    if h <= 0.0 {
        return (linalg::dist(&a.state.z(), z_ref), a.t);
    }
    let za = a.state.z();
    let zb = b.state.z();
    let eval = |u: f64| -> Vec<f64> {
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        (0..za.len())
            .map(|k| h00 * za[k] + h10 * h * a.velocity[k] + h01 * zb[k] + h11 * h * b.velocity[k])
            .collect()
    };
    const STEPS: usize = 32;
    let mut d2 = [0.0f64; STEPS + 1];
    let mut best_k = 0;
    for k in 0..=STEPS {
        let u = k as f64 / STEPS as f64;
        let p = eval(u);
        let d = linalg::dist(&p, z_ref);
        d2[k] = d * d;
        if d2[k] < d2[best_k] {
            best_k = k;
        }
    }
    let du = 1.0 / STEPS as f64;
    let mut u_star = best_k as f64 * du;
    let mut d2_star = d2[best_k];
    if best_k > 0 && best_k < STEPS {
        let (ua, ub, uc) = (u_star - du, u_star, u_star + du);
        if let Some((uv, dv)) =
            parabola_vertex(ua, d2[best_k - 1], ub, d2[best_k], uc, d2[best_k + 1])
        {
            if uv > ua && uv < uc && dv < d2_star {
                u_star = uv;
                d2_star = dv;
            }
        }
    }
    (d2_star.max(0.0).sqrt(), a.t + u_star * h)
}

fn visit_neighbors(
    cell: &[i64],
    depth: usize,
    scratch: &mut Vec<i64>,
    visit: &mut impl FnMut(&Vec<i64>),
) {
    if depth == cell.len() {
        visit(scratch);
        return;
    }
    for delta in -1..=1 {
        scratch[depth] = cell[depth] + delta;
        visit_neighbors(cell, depth + 1, scratch, visit);
    }
}

/// Vertex `(x, y)` of the parabola through three points, if it opens up.
fn parabola_vertex(xa: f64, ya: f64, xb: f64, yb: f64, xc: f64, yc: f64) -> Option<(f64, f64)> {
    let d1 = (yb - ya) / (xb - xa);
    let d2 = (yc - yb) / (xc - xb);
    let curv = (d2 - d1) / (xc - xa);
    if curv <= 0.0 {
        return None;
    }
    let xv = (xa + xb) / 2.0 - d1 / (2.0 * curv);
    let yv = ya + d1 * (xv - xa) + curv * (xv - xa) * (xv - xb);
    Some((xv, yv))
}

/// One steady state found by the root search.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: State,
    /// `|∇S|` at the returned point.
    pub residual: f64,
}

/// Result of a multi-start steady-state search.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateSearch {
    /// Cluster representatives, ordered lexicographically by position.
    pub states: Vec<SteadyState>,
    pub converged_starts: usize,
    pub dropped_starts: usize,
}

pub const STEADY_STATE_TOL: f64 = 1e-8;
const ROOT_DESCENT_ITERATIONS: usize = 2000;
const NEWTON_POLISH_ITERATIONS: usize = 30;
const CLUSTER_TOL: f64 = 1e-6;

/// Finds steady states (`∇S = 0`) from low-discrepancy starts in the box
/// by damped least-squares descent on `½|∇S|²` with a Newton polish, then
/// clusters the results. Starts that do not reach a small residual are
/// dropped and counted.
pub fn find_steady_states(
    p: &Payoff,
    box_: &crate::certify::BoxDomain,
    starts: usize,
) -> SteadyStateSearch {
    assert!(starts >= 1);
    assert_eq!(box_.dim(), p.dim());
    let m = p.m();
    let mut found: Vec<SteadyState> = Vec::new();
    let mut converged = 0usize;
    let mut dropped = 0usize;

    for idx in 1..=starts {
        let z0 = halton_in_box(idx, &box_.lower, &box_.upper);
        match polish_root(p, &z0) {
            Some((z, residual)) if residual < STEADY_STATE_TOL => {
                converged += 1;
                let duplicate = found
                    .iter()
                    .any(|s| linalg::dist(&s.state.z(), &z) < CLUSTER_TOL);
                if !duplicate {
                    found.push(SteadyState {
                        state: State::from_z(&z, m),
                        residual,
                    });
                }
            }
            _ => dropped += 1,
        }
    }

    found.sort_by(|a, b| a.state.z().partial_cmp(&b.state.z()).unwrap());
    SteadyStateSearch {
        states: found,
        converged_starts: converged,
        dropped_starts: dropped,
    }
}

fn full_gradient(p: &Payoff, z: &[f64]) -> Option<Vec<f64>> {
    let m = p.m();
    let (sx, sy) = p.grad(&z[..m], &z[m..]).ok()?;
    let mut g = sx;
    g.extend(sy);
    Some(g)
}

fn full_hessian(p: &Payoff, z: &[f64]) -> Option<Matrix> {
    let m = p.m();
    let h = p.hessian(&z[..m], &z[m..]).ok()?;
    Some(h.assemble_full())
}

/// Gradient descent on `½|∇S|²` (whose gradient is `H·∇S` since the full
/// Hessian is symmetric), followed by Newton steps on `∇S = 0` once the
/// residual is small.
fn polish_root(p: &Payoff, z0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut z = z0.to_vec();
    let mut g = full_gradient(p, &z)?;
    let mut obj = 0.5 * linalg::dot(&g, &g);
    let mut step = 1.0f64;
    for _ in 0..ROOT_DESCENT_ITERATIONS {
        if linalg::norm(&g) < 1e-6 {
            break;
        }
        let h = full_hessian(p, &z)?;
        let descent = h.mul_vec(&g); // ∇(½|G|²) = H G
        let dnorm2 = linalg::dot(&descent, &descent);
        if dnorm2 == 0.0 {
            break;
        }
        let mut t = (step * 2.0).min(1e3);
        let mut accepted = false;
        while t > 1e-18 {
            let cand = linalg::axpy(&z, -t, &descent);
            if let Some(gc) = full_gradient(p, &cand) {
                let oc = 0.5 * linalg::dot(&gc, &gc);
                if oc <= obj - 1e-4 * t * dnorm2 && oc.is_finite() {
                    z = cand;
                    g = gc;
                    obj = oc;
                    step = t;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // Newton polish on ∇S = 0
    for _ in 0..NEWTON_POLISH_ITERATIONS {
        let gnorm = linalg::norm(&g);
        if gnorm < 1e-13 {
            break;
        }
        let h = full_hessian(p, &z)?;
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(delta) = linalg::solve(&h, &neg_g) else {
            break;
        };
        let cand = linalg::axpy(&z, 1.0, &delta);
        let Some(gc) = full_gradient(p, &cand) else {
            break;
        };
        if linalg::norm(&gc) < gnorm {
            z = cand;
            g = gc;
        } else {
            break;
        }
    }
    let residual = linalg::norm(&g);
    Some((z, residual))
}
