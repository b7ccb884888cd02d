//! Total-energy Lyapunov diagnostics and the force decomposition of the
//! induced second-order dynamics.
//!
//! Differentiating `ż = (-S_x, S_y)` in time gives a Newton-like law
//! `z̈ = -Φ_z - K_A(z)ż - K_S(z)ż` with potential `Φ = -r·S`, an
//! antisymmetric (velocity-perpendicular, "magnetic") matrix
//!
//! ```text
//! K_A = [ 0     S_xy ]        K_S = [ S_xx - rI        0        ]
//!       [ -S_yx   0  ]              [ 0         -(S_yy - rI)    ]
//! ```
//!
//! and a symmetric residual `K_S` that is the only energy-non-conserving
//! term: the total energy `L = ½|ż|² - r·S` obeys `L̇ = -żᵀK_S ż`,
//! expanded here as `L̇ = -ẋᵀ(S_xx - rI)ẋ + ẏᵀ(S_yy - rI)ẏ`. All
//! quantities are computed from the Hessian blocks; finite differences
//! appear only in the audit cross-check.

use crate::dynamics::{vector_field, State, Trajectory};
use crate::error::EvalError;
use crate::linalg::{self, Matrix};
use crate::payoff::Payoff;
use serde::Serialize;

/// Energy snapshot at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReading {
    /// Energy parameter scaling the potential.
    pub r: f64,
    /// `T = ½(|ẋ|² + |ẏ|²)`, velocities recomputed from the field.
    pub kinetic: f64,
    /// `Φ = -r·S`.
    pub potential: f64,
    /// `L = T + Φ`.
    pub total: f64,
    /// Analytic `L̇` from the Hessian blocks.
    pub rate: f64,
}

/// The three forces of the second-order form, plus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDecomposition {
    /// `-Φ_z = r·(S_x, S_y)`.
    pub electric: Vec<f64>,
    /// `-K_A·ż`, always perpendicular to `ż`.
    pub magnetic: Vec<f64>,
    /// `-K_S·ż`, the energy-violating residual.
    pub residual: Vec<f64>,
    /// `z̈` from the Hessian product applied to `ż`.
    pub acceleration: Vec<f64>,
}

/// Energy reading at a state; the velocity is recomputed from the vector
/// field, so this is meaningful at any point, not just along trajectories.
pub fn lyapunov(p: &Payoff, s: &State, r: f64) -> Result<EnergyReading, EvalError> {
    let velocity = vector_field(p, s)?;
    let payoff = p.eval(&s.x, &s.y)?;
    let hess = p.hessian(&s.x, &s.y)?;
    let m = p.m();
    let xdot = &velocity[..m];
    let ydot = &velocity[m..];
    let kinetic = 0.5 * linalg::dot(&velocity, &velocity);
    let potential = -r * payoff;
    let rate = rate_from_hessian(&hess.s_xx, &hess.s_yy, xdot, ydot, r);
    Ok(EnergyReading {
        r,
        kinetic,
        potential,
        total: kinetic + potential,
        rate,
    })
}

/// `L̇ = -ẋᵀ(S_xx - rI)ẋ + ẏᵀ(S_yy - rI)ẏ`.
fn rate_from_hessian(s_xx: &Matrix, s_yy: &Matrix, xdot: &[f64], ydot: &[f64], r: f64) -> f64 {
    let qx = quad_form(s_xx, xdot) - r * linalg::dot(xdot, xdot);
    let qy = quad_form(s_yy, ydot) - r * linalg::dot(ydot, ydot);
    -qx + qy
}

fn quad_form(m: &Matrix, v: &[f64]) -> f64 {
    linalg::dot(v, &m.mul_vec(v))
}

/// Splits the acceleration at `s` into electric, magnetic, and residual
/// forces. The identity `electric + magnetic + residual = acceleration`
/// holds because the velocity is the actual field at `s`.
pub fn force_decomposition(p: &Payoff, s: &State, r: f64) -> Result<ForceDecomposition, EvalError> {
    let velocity = vector_field(p, s)?;
    let (sx, sy) = p.grad(&s.x, &s.y)?;
    let hess = p.hessian(&s.x, &s.y)?;
    let m = p.m();
    let n = p.n();
    let xdot = &velocity[..m];
    let ydot = &velocity[m..];

    // electric = -Φ_z = r·(S_x, S_y)
    let mut electric = Vec::with_capacity(m + n);
    electric.extend(sx.iter().map(|g| r * g));
    electric.extend(sy.iter().map(|g| r * g));

    // magnetic = -K_A ż : x-part = -S_xy ẏ, y-part = +S_yx ẋ = S_xyᵀ ẋ
    let mut magnetic = Vec::with_capacity(m + n);
    magnetic.extend(hess.s_xy.mul_vec(ydot).iter().map(|v| -v));
    magnetic.extend(hess.s_xy.mul_vec_transposed(xdot));

    // residual = -K_S ż : x-part = -(S_xx - rI) ẋ, y-part = (S_yy - rI) ẏ
    let mut residual = Vec::with_capacity(m + n);
    let sxx_xdot = hess.s_xx.mul_vec(xdot);
    residual.extend(sxx_xdot.iter().zip(xdot).map(|(v, xd)| -(v - r * xd)));
    let syy_ydot = hess.s_yy.mul_vec(ydot);
    residual.extend(syy_ydot.iter().zip(ydot).map(|(v, yd)| v - r * yd));

    // z̈ = [[-S_xx, -S_xy], [S_yx, S_yy]] ż
    let mut acceleration = Vec::with_capacity(m + n);
    let sxy_ydot = hess.s_xy.mul_vec(ydot);
    acceleration.extend(sxx_xdot.iter().zip(&sxy_ydot).map(|(a, b)| -(a + b)));
    let syx_xdot = hess.s_xy.mul_vec_transposed(xdot);
    acceleration.extend(syx_xdot.iter().zip(&syy_ydot).map(|(a, b)| a + b));

    Ok(ForceDecomposition {
        electric,
        magnetic,
        residual,
        acceleration,
    })
}

/// Numerical audit of the dissipation identity along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// Max |analytic L̇ - finite-difference L̇| over interior points.
    pub max_rate_discrepancy: f64,
    /// L nonincreasing between consecutive samples within
    /// `1e-7·(1 + |L|)` slack.
    pub monotone: bool,
    /// Time of the worst rate discrepancy.
    pub worst_t: f64,
    /// Max |L(t) - L(0)| over the trajectory.
    pub max_drift: f64,
}

pub const MONOTONE_SLACK: f64 = 1e-7;

/// Recomputes `L` at every recorded point, compares the analytic rate
/// with a three-point finite difference (the plain central difference for
/// uniform spacing, its non-uniform generalization otherwise), and checks
/// monotonicity within scale-aware slack. Needs at least 3 points.
pub fn energy_audit(p: &Payoff, traj: &Trajectory, r: f64) -> Result<AuditReport, EvalError> {
    assert!(
        traj.points.len() >= 3,
        "energy audit needs at least 3 recorded points"
    );
    let readings: Vec<EnergyReading> = traj
        .points
        .iter()
        .map(|pt| lyapunov(p, &pt.state, r))
        .collect::<Result<_, _>>()?;

    let l0 = readings[0].total;
    let mut max_drift = 0.0f64;
    for reading in &readings {
        max_drift = max_drift.max((reading.total - l0).abs());
    }

    let mut monotone = true;
    for pair in readings.windows(2) {
        let slack = MONOTONE_SLACK * (1.0 + pair[0].total.abs());
        if pair[1].total > pair[0].total + slack {
            monotone = false;
            break;
        }
    }

    let mut max_disc = 0.0f64;
    let mut worst_t = traj.points[0].t;
    for i in 1..readings.len() - 1 {
        let t0 = traj.points[i - 1].t;
        let t1 = traj.points[i].t;
        let t2 = traj.points[i + 1].t;
        let h0 = t1 - t0;
        let h1 = t2 - t1;
        let (l_prev, l_mid, l_next) = (
            readings[i - 1].total,
            readings[i].total,
            readings[i + 1].total,
        );
        let fd = l_prev * (-h1 / (h0 * (h0 + h1)))
            + l_mid * ((h1 - h0) / (h0 * h1))
            + l_next * (h0 / (h1 * (h0 + h1)));
        let disc = (readings[i].rate - fd).abs();
        if disc > max_disc {
            max_disc = disc;
            worst_t = t1;
        }
    }

    Ok(AuditReport {
        max_rate_discrepancy: max_disc,
        monotone,
        worst_t,
        max_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig, Method};
    use crate::payoff::{ExpressionPayoff, QuadraticPayoff};

    fn quad(a: f64, b: f64, c: f64) -> Payoff {
        Payoff::Quadratic(QuadraticPayoff::scalar(a, b, c))
    }

    fn rotation() -> Payoff {
        Payoff::Expression(ExpressionPayoff::parse("x1*y1", 1, 1).unwrap())
    }

    #[test]
    fn lyapunov_examples() {
        // conservative rotation at r = 0
        let e = lyapunov(&rotation(), &State::new(vec![1.0], vec![0.0]), 0.0).unwrap();
        assert_eq!(e.kinetic, 0.5);
        assert_eq!(e.total, 0.5);
        assert_eq!(e.rate, 0.0);

        // hand evaluation: ẋ = -4, ẏ = 3, T = 12.5, L = 12.5 - 1.5·3.5
        let e = lyapunov(&quad(2.0, 2.0, 1.0), &State::new(vec![1.0], vec![1.0]), 1.5).unwrap();
        assert_eq!(e.kinetic, 12.5);
        assert!((e.total - 7.25).abs() < 1e-12);

        // rate with r = 0: -(ẋ²·a) + (ẏ²·c) = -1 - 1
        let e = lyapunov(
            &quad(1.0, 0.0, -1.0),
            &State::new(vec![1.0], vec![1.0]),
            0.0,
        )
        .unwrap();
        assert!((e.rate + 2.0).abs() < 1e-12);
    }

    #[test]
    fn force_decomposition_rotation() {
        // ż = (0, 1), K_A = [[0,1],[-1,0]]: acceleration is pure magnetic
        let f = force_decomposition(&rotation(), &State::new(vec![1.0], vec![0.0]), 0.0).unwrap();
        assert_eq!(f.electric, vec![0.0, 0.0]);
        assert_eq!(f.residual, vec![0.0, 0.0]);
        assert_eq!(f.magnetic, vec![-1.0, 0.0]);
        assert_eq!(f.acceleration, vec![-1.0, 0.0]);
    }

    #[test]
    fn force_decomposition_steady_state() {
        let f = force_decomposition(&quad(2.0, 2.0, 1.0), &State::new(vec![0.0], vec![0.0]), 1.5)
            .unwrap();
        assert_eq!(f.magnetic, vec![0.0, 0.0]);
        assert_eq!(f.residual, vec![0.0, 0.0]);
        assert_eq!(f.acceleration, vec![0.0, 0.0]);
    }

    #[test]
    fn force_decomposition_pure_residual() {
        // ż = (-1, -1); K_S = diag(1, 1) at r = 0: residual = (1, 1)
        let f = force_decomposition(
            &quad(1.0, 0.0, -1.0),
            &State::new(vec![1.0], vec![1.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(f.electric, vec![0.0, 0.0]);
        assert_eq!(f.magnetic, vec![0.0, 0.0]);
        assert_eq!(f.residual, vec![1.0, 1.0]);
        assert_eq!(f.acceleration, vec![1.0, 1.0]);
    }

    #[test]
    fn force_sum_identity_holds() {
        let p = quad(2.0, 2.0, 1.0);
        let s = State::new(vec![0.3], vec![-1.2]);
        let f = force_decomposition(&p, &s, 1.5).unwrap();
        for i in 0..2 {
            let sum = f.electric[i] + f.magnetic[i] + f.residual[i];
            assert!((sum - f.acceleration[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_equals_residual_power() {
        // L̇ = -żᵀK_S ż = ⟨residual, ż⟩; both routes must agree
        let cases = [
            (quad(2.0, 2.0, 1.0), 1.5),
            (quad(1.0, 0.0, -1.0), 0.0),
            (quad(-1.0, 0.5, -2.0), -1.5),
        ];
        for (p, r) in cases {
            let s = State::new(vec![0.7], vec![-0.4]);
            let reading = lyapunov(&p, &s, r).unwrap();
            let f = force_decomposition(&p, &s, r).unwrap();
            let velocity = crate::dynamics::vector_field(&p, &s).unwrap();
            let power = linalg::dot(&f.residual, &velocity);
            assert!(
                (reading.rate - power).abs() <= 1e-12 * (1.0 + reading.rate.abs()),
                "rate {} vs residual power {power}",
                reading.rate
            );
        }
    }

    #[test]
    fn audit_conservative_rotation() {
        let cfg = IntegratorConfig {
            t_max: 20.0,
            ..Default::default()
        };
        let traj = integrate(&rotation(), &State::new(vec![1.0], vec![0.0]), &cfg);
        let audit = energy_audit(&rotation(), &traj, 0.0).unwrap();
        assert!(audit.max_drift <= 1e-6, "drift {}", audit.max_drift);
        assert!(audit.monotone);
    }

    #[test]
    fn audit_dissipative_quadratic_monotone() {
        let p = quad(2.0, 2.0, 1.0);
        let cfg = IntegratorConfig {
            t_max: 30.0,
            ..Default::default()
        };
        let traj = integrate(&p, &State::new(vec![1.3], vec![-0.8]), &cfg);
        let audit = energy_audit(&p, &traj, 1.5).unwrap();
        assert!(audit.monotone);
    }

    #[test]
    fn audit_rate_matches_finite_difference() {
        // recorded spacing 1e-3 keeps the h²L'''/6 stencil error near 1e-6
        let p = quad(1.0, 0.0, -1.0);
        let cfg = IntegratorConfig {
            method: Method::FixedRk4,
            step: 1e-3,
            t_max: 5.0,
            record_every: Some(1),
            ..Default::default()
        };
        let traj = integrate(&p, &State::new(vec![1.0], vec![1.0]), &cfg);
        let audit = energy_audit(&p, &traj, 0.0).unwrap();
        assert!(
            audit.max_rate_discrepancy < 1e-5,
            "discrepancy {}",
            audit.max_rate_discrepancy
        );
    }

    #[test]
    fn kinetic_energy_can_rise_while_total_energy_falls() {
        // spiral sink: T oscillates, L with certified r does not increase
        let p = quad(2.0, 2.0, 1.0);
        let cfg = IntegratorConfig {
            t_max: 20.0,
            ..Default::default()
        };
        let traj = integrate(&p, &State::new(vec![1.0], vec![1.0]), &cfg);
        let kinetic: Vec<f64> = traj.points.iter().map(|pt| pt.kinetic).collect();
        let rose = kinetic.windows(2).any(|w| w[1] > w[0] + 1e-12);
        assert!(rose, "kinetic energy never increased");
        let audit = energy_audit(&p, &traj, 1.5).unwrap();
        assert!(audit.monotone);
    }
}
