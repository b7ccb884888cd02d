//! Integration of the gradient descent-ascent flow `ż = (-S_x, +S_y)`.
//!
//! Two integrators: classical fixed-step RK4 and an adaptive Dormand-
//! Prince 5(4) embedded pair with the standard step controller. Recorded
//! trajectory points carry the velocity recomputed from the vector field
//! at the recorded state, never the integrator's internal increments.

use crate::error::EvalError;
use crate::linalg;
use crate::payoff::Payoff;
use serde::{Deserialize, Serialize};

/// Joint state `z = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl State {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        State { x, y }
    }

    /// Concatenated coordinates.
    pub fn z(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter()).copied().collect()
    }

    pub fn from_z(z: &[f64], m: usize) -> Self {
        State {
            x: z[..m].to_vec(),
            y: z[m..].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.z())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// One recorded sample along a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: State,
    /// `(-S_x, S_y)` recomputed at `state`.
    pub velocity: Vec<f64>,
    /// `S(state)`.
    pub payoff: f64,
    /// `T = ½|velocity|²`.
    pub kinetic: f64,
}

/// Why integration stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Reached `t_max`.
    Horizon,
    /// `|z|` exceeded the blow-up radius.
    Blowup { radius: f64, t: f64 },
    /// A state or evaluation went non-finite (or out of domain).
    NonFinite { t: f64, detail: String },
}

/// Recorded trajectory with its stop reason.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn last_state(&self) -> &State {
        &self.points.last().expect("trajectory is never empty").state
    }

    /// Diagonal of the axis-aligned bounding box of all recorded states.
    pub fn diameter(&self) -> f64 {
        let dim = self.points[0].state.z().len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in &self.points {
            for (i, v) in p.state.z().iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedRk4,
    AdaptiveEmbedded,
}

/// Integrator settings. `record_every = None` picks a decimation that
/// keeps at most `MAX_RECORDED_POINTS` samples per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or initial step for the adaptive method.
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub record_every: Option<usize>,
    pub blowup_radius: f64,
}

pub const MAX_RECORDED_POINTS: usize = 100_000;

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::AdaptiveEmbedded,
            step: 0.01,
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            t_max: 100.0,
            record_every: None,
            blowup_radius: 1e6,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step > 0.0) {
            return Err("step must be > 0".into());
        }
        if !(self.rel_tol > 0.0) {
            return Err("rel_tol must be > 0".into());
        }
        if !(self.abs_tol > 0.0) {
            return Err("abs_tol must be > 0".into());
        }
        if !(self.t_max > 0.0) {
            return Err("t_max must be > 0".into());
        }
        if !(self.blowup_radius > 0.0) {
            return Err("blowup_radius must be > 0".into());
        }
        if self.record_every == Some(0) {
            return Err("record_every must be >= 1".into());
        }
        Ok(())
    }
}

/// `ż = (-S_x(x,y), +S_y(x,y))`.
pub fn vector_field(p: &Payoff, s: &State) -> Result<Vec<f64>, EvalError> {
    let (sx, sy) = p.grad(&s.x, &s.y)?;
    let mut v = Vec::with_capacity(sx.len() + sy.len());
    v.extend(sx.iter().map(|g| -g));
    v.extend(sy);
    Ok(v)
}

fn field_z(p: &Payoff, z: &[f64]) -> Result<Vec<f64>, EvalError> {
    let m = p.m();
    let (sx, sy) = p.grad(&z[..m], &z[m..])?;
    let mut v = Vec::with_capacity(z.len());
    v.extend(sx.iter().map(|g| -g));
    v.extend(sy);
    Ok(v)
}

/// One classical 4th-order Runge-Kutta step.
pub fn step_fixed_rk4(p: &Payoff, s: &State, h: f64) -> Result<State, EvalError> {
    assert!(h > 0.0, "step must be positive");
    let z = s.z();
    let z_new = rk4_step_z(p, &z, h)?;
    Ok(State::from_z(&z_new, p.m()))
}

fn rk4_step_z(p: &Payoff, z: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let k1 = field_z(p, z)?;
    let k2 = field_z(p, &linalg::axpy(z, h / 2.0, &k1))?;
    let k3 = field_z(p, &linalg::axpy(z, h / 2.0, &k2))?;
    let k4 = field_z(p, &linalg::axpy(z, h, &k3))?;
    Ok(z.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand-Prince 5(4) tableau. The stage-time coefficients are omitted:
// the field is autonomous.
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights (the solution that is propagated).
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// 4th-order embedded weights.
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince attempt: returns 5th-order solution and the scaled
/// error-norm of the embedded difference.
fn dp_step_z(
    p: &Payoff,
    z: &[f64],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(Vec<f64>, f64), EvalError> {
    let dim = z.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for row in &DP_A {
        let mut zs = z.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = row[j];
            if a != 0.0 {
                for i in 0..dim {
                    zs[i] += h * a * kj[i];
                }
            }
        }
        k.push(field_z(p, &zs)?);
    }
    let mut z5 = z.to_vec();
    let mut err = vec![0.0; dim];
    for (stage, kj) in k.iter().enumerate() {
        for i in 0..dim {
            z5[i] += h * DP_B5[stage] * kj[i];
            err[i] += h * (DP_B5[stage] - DP_B4[stage]) * kj[i];
        }
    }
    let mut acc = 0.0;
    for i in 0..dim {
        let scale = abs_tol + rel_tol * z[i].abs().max(z5[i].abs());
        let e = err[i] / scale;
        acc += e * e;
    }
    Ok((z5, (acc / dim as f64).sqrt()))
}

/// Integrates from `s0` to `cfg.t_max`, or stops early on blow-up or a
/// non-finite/out-of-domain evaluation.
pub fn integrate(p: &Payoff, s0: &State, cfg: &IntegratorConfig) -> Trajectory {
    cfg.validate().expect("invalid integrator config");
    assert_eq!(s0.x.len(), p.m());
    assert_eq!(s0.y.len(), p.n());
    match cfg.method {
        Method::FixedRk4 => integrate_fixed(p, s0, cfg),
        Method::AdaptiveEmbedded => integrate_adaptive(p, s0, cfg),
    }
}

struct Recorder<'a> {
    p: &'a Payoff,
    points: Vec<TrajectoryPoint>,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, t: f64, z: &[f64]) -> Result<(), EvalError> {
        let state = State::from_z(z, self.p.m());
        let velocity = vector_field(self.p, &state)?;
        let payoff = self.p.eval(&state.x, &state.y)?;
        let kinetic = 0.5 * linalg::dot(&velocity, &velocity);
        self.points.push(TrajectoryPoint {
            t,
            state,
            velocity,
            payoff,
            kinetic,
        });
        Ok(())
    }
}

fn stop_nonfinite(points: Vec<TrajectoryPoint>, t: f64, detail: String) -> Trajectory {
    Trajectory {
        points,
        stop: StopReason::NonFinite { t, detail },
    }
}

fn integrate_fixed(p: &Payoff, s0: &State, cfg: &IntegratorConfig) -> Trajectory {
    let n_steps = (cfg.t_max / cfg.step).ceil().max(1.0) as usize;
    let record_every = cfg
        .record_every
        .unwrap_or_else(|| n_steps.div_ceil(MAX_RECORDED_POINTS).max(1));
    let mut rec = Recorder {
        p,
        points: Vec::new(),
    };
    let mut z = s0.z();
    if let Err(e) = rec.record(0.0, &z) {
        return stop_nonfinite(rec.points, 0.0, e.to_string());
    }
    for step_idx in 1..=n_steps {
        let t_prev = (step_idx - 1) as f64 * cfg.step;
        // shrink the last step to land exactly on the horizon
        let h = if t_prev + cfg.step > cfg.t_max {
            cfg.t_max - t_prev
        } else {
            cfg.step
        };
        if h <= 0.0 {
            break;
        }
        let t = t_prev + h;
        z = match rk4_step_z(p, &z, h) {
            Ok(z_new) => z_new,
            Err(e) => return stop_nonfinite(rec.points, t, e.to_string()),
        };
        if !z.iter().all(|v| v.is_finite()) {
            return stop_nonfinite(rec.points, t, "non-finite state".into());
        }
        let radius = linalg::norm(&z);
        if radius > cfg.blowup_radius {
            let _ = rec.record(t, &z);
            return Trajectory {
                points: rec.points,
                stop: StopReason::Blowup { radius, t },
            };
        }
        if step_idx.is_multiple_of(record_every) || step_idx == n_steps {
            if let Err(e) = rec.record(t, &z) {
                return stop_nonfinite(rec.points, t, e.to_string());
            }
        }
    }
    Trajectory {
        points: rec.points,
        stop: StopReason::Horizon,
    }
}

fn integrate_adaptive(p: &Payoff, s0: &State, cfg: &IntegratorConfig) -> Trajectory {
    let record_every = cfg.record_every.unwrap_or(1);
    // step cap keeps recorded samples dense enough for the trailing-window
    // and recurrence analyses even after the transient has died out
    let h_max = cfg.t_max / 500.0;
    let h_min = cfg.t_max * 1e-14;
    let mut rec = Recorder {
        p,
        points: Vec::new(),
    };
    let mut z = s0.z();
    let mut t = 0.0;
    let mut h = cfg.step.min(h_max);
    if let Err(e) = rec.record(0.0, &z) {
        return stop_nonfinite(rec.points, 0.0, e.to_string());
    }
    let mut accepted: usize = 0;
    loop {
        if t >= cfg.t_max {
            break;
        }
        if t + h > cfg.t_max {
            h = cfg.t_max - t;
        }
        let (z_new, err) = match dp_step_z(p, &z, h, cfg.rel_tol, cfg.abs_tol) {
            Ok(out) => out,
            Err(e) => return stop_nonfinite(rec.points, t, e.to_string()),
        };
        if err.is_finite() && err <= 1.0 {
            t += h;
            z = z_new;
            accepted += 1;
            if !z.iter().all(|v| v.is_finite()) {
                return stop_nonfinite(rec.points, t, "non-finite state".into());
            }
            let radius = linalg::norm(&z);
            if radius > cfg.blowup_radius {
                let _ = rec.record(t, &z);
                return Trajectory {
                    points: rec.points,
                    stop: StopReason::Blowup { radius, t },
                };
            }
            let at_end = t >= cfg.t_max;
            if accepted.is_multiple_of(record_every) || at_end {
                if let Err(e) = rec.record(t, &z) {
                    return stop_nonfinite(rec.points, t, e.to_string());
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(h_max);
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= factor;
            if h < h_min {
                return stop_nonfinite(rec.points, t, "step size underflow".into());
            }
        }
    }
    Trajectory {
        points: rec.points,
        stop: StopReason::Horizon,
    }
}
