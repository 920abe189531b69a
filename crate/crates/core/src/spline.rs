//! Cubic spline trajectories from the ego origin to a waypoint pose.
//!
//! Each axis is one cubic Hermite segment in normalized time
//! `s = t / horizon`. The start is the ego origin heading along +x at the
//! current speed; the end is the waypoint position heading along its angle
//! at a configured terminal speed. Heading, speed and turn rate follow from
//! the analytic derivatives of the two polynomials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, wrap_angle, ControlInput, RobotState, VehicleSpec};
use crate::geom::Point2;

/// Turn-rate bound is checked against `OMEGA_MARGIN * omega_max`.
pub const OMEGA_MARGIN: f64 = 0.99;
/// Initial speed used when starting from rest, m/s.
pub const MIN_START_SPEED: f64 = 1e-3;
/// Squared speed (m²/s²) below which the heading is undefined.
pub const DEGENERATE_SPEED_SQ: f64 = 1e-12;
/// Heading change between samples, in units of `omega_max * dt`, above
/// which the path is taken to reverse direction.
pub const MAX_SAMPLE_TURN_FACTOR: f64 = 2.0;

/// Ego-frame target pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Waypoint {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Why a spline was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("speed {v:.4} m/s out of bounds at t = {t:.2} s")]
    SpeedBound { t: f64, v: f64 },
    #[error("turn rate {omega:.4} rad/s out of bounds at t = {t:.2} s")]
    OmegaBound { t: f64, omega: f64 },
    #[error("speed vanishes at t = {t:.2} s, heading undefined")]
    DegenerateHeading { t: f64 },
    #[error("invalid spline input: {0}")]
    InvalidInput(String),
}

/// Planar cubic `p(s) = c0 + c1 s + c2 s² + c3 s³`, `s ∈ [0, 1]`, stretched
/// over `horizon` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSpline2 {
    cx: [f64; 4],
    cy: [f64; 4],
    horizon: f64,
}

impl CubicSpline2 {
    /// Hermite form: endpoint positions and endpoint derivatives with respect to `s`.
    pub fn hermite(p0: Point2, m0: Point2, p1: Point2, m1: Point2, horizon: f64) -> Self {
        let coeffs = |p0: f64, m0: f64, p1: f64, m1: f64| {
            [
                p0,
                m0,
                -3.0 * p0 - 2.0 * m0 + 3.0 * p1 - m1,
                2.0 * p0 + m0 - 2.0 * p1 + m1,
            ]
        };
        Self {
            cx: coeffs(p0.x, m0.x, p1.x, m1.x),
            cy: coeffs(p0.y, m0.y, p1.y, m1.y),
            horizon,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The same curve traversed backwards, `q(s) = p(1 - s)`.
    pub fn reversed(&self) -> Self {
        let rev = |c: [f64; 4]| {
            [
                c[0] + c[1] + c[2] + c[3],
                -c[1] - 2.0 * c[2] - 3.0 * c[3],
                c[2] + 3.0 * c[3],
                -c[3],
            ]
        };
        Self {
            cx: rev(self.cx),
            cy: rev(self.cy),
            horizon: self.horizon,
        }
    }

    pub fn position(&self, s: f64) -> Point2 {
        let f = |c: &[f64; 4]| ((c[3] * s + c[2]) * s + c[1]) * s + c[0];
        Point2::new(f(&self.cx), f(&self.cy))
    }

    /// First derivative with respect to `s`.
    pub fn velocity(&self, s: f64) -> Point2 {
        let f = |c: &[f64; 4]| (3.0 * c[3] * s + 2.0 * c[2]) * s + c[1];
        Point2::new(f(&self.cx), f(&self.cy))
    }

    /// Second derivative with respect to `s`.
    pub fn acceleration(&self, s: f64) -> Point2 {
        let f = |c: &[f64; 4]| 6.0 * c[3] * s + 2.0 * c[2];
        Point2::new(f(&self.cx), f(&self.cy))
    }

    /// Speed in m/s at normalized time `s`.
    pub fn speed(&self, s: f64) -> f64 {
        self.velocity(s).norm() / self.horizon
    }

    pub fn heading(&self, s: f64) -> f64 {
        let d = self.velocity(s);
        d.y.atan2(d.x)
    }

    /// Forward speed and turn rate at `s` from the analytic derivatives.
    pub fn control(&self, s: f64) -> Result<ControlInput, SplineError> {
        let d1 = self.velocity(s);
        let d2 = self.acceleration(s);
        let sq = d1.x * d1.x + d1.y * d1.y;
        if sq / (self.horizon * self.horizon) < DEGENERATE_SPEED_SQ {
            return Err(SplineError::DegenerateHeading {
                t: s * self.horizon,
            });
        }
        let omega = (d1.x * d2.y - d1.y * d2.x) / sq / self.horizon;
        Ok(ControlInput::new(sq.sqrt() / self.horizon, omega))
    }
}

/// Controls at `n_steps` evenly spaced samples `s = k / n_steps`, `k < n_steps`.
pub fn recover_controls(
    spline: &CubicSpline2,
    n_steps: usize,
) -> Result<Vec<ControlInput>, SplineError> {
    (0..n_steps)
        .map(|k| spline.control(k as f64 / n_steps as f64))
        .collect()
}

/// Sampled ego-frame state and control trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrajectory {
    pub dt: f64,
    pub horizon: f64,
    /// `n + 1` states at `t = k * dt`; `states[0]` is the ego origin.
    pub states: Vec<RobotState>,
    /// `n` controls, one per transition.
    pub controls: Vec<ControlInput>,
    pub spline: CubicSpline2,
}

impl PlannedTrajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    /// Sampled states placed in the world frame at `origin`.
    pub fn world_states(&self, origin: &RobotState) -> Vec<RobotState> {
        self.states.iter().map(|s| origin.compose(s)).collect()
    }

    /// States obtained by Euler-integrating the controls from `origin`.
    ///
    /// This is the reference a tracking controller should follow: it
    /// satisfies the discrete dynamics exactly, whereas the spline samples
    /// only do so up to the integration error.
    pub fn rollout_from(&self, origin: &RobotState) -> Vec<RobotState> {
        dynamics::rollout(origin, &self.controls, self.dt)
    }

    /// Largest lateral excursion `max |y(t)|` over the samples.
    pub fn max_lateral(&self) -> f64 {
        self.states.iter().map(|s| s.y.abs()).fold(0.0, f64::max)
    }
}

/// Fit a cubic from the ego origin at speed `u0.v` to the waypoint pose,
/// arriving at `terminal_speed` after `horizon` seconds, and check the
/// sampled controls against the vehicle bounds.
///
/// A start from rest uses [`MIN_START_SPEED`] so that the initial heading
/// stays defined.
pub fn fit_spline(
    w: &Waypoint,
    u0: &ControlInput,
    horizon: f64,
    spec: &VehicleSpec,
    terminal_speed: f64,
) -> Result<PlannedTrajectory, SplineError> {
    if !w.is_finite() {
        return Err(SplineError::InvalidInput("non-finite waypoint".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SplineError::InvalidInput(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    if !(0.0..=spec.v_max).contains(&terminal_speed) {
        return Err(SplineError::InvalidInput(format!(
            "terminal speed {terminal_speed} outside [0, v_max]"
        )));
    }
    if !u0.v.is_finite() || u0.v < 0.0 || u0.v > spec.v_max * (1.0 + 1e-12) {
        return Err(SplineError::InvalidInput(format!(
            "initial speed {} outside [0, v_max]",
            u0.v
        )));
    }
    let n = spec.steps(horizon);
    if n == 0 || ((n as f64 * spec.dt) - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(SplineError::InvalidInput(format!(
            "horizon {horizon} is not a multiple of dt {}",
            spec.dt
        )));
    }

    let v0 = u0.v.max(MIN_START_SPEED);
    let (st, ct) = w.theta.sin_cos();
    let spline = CubicSpline2::hermite(
        Point2::new(0.0, 0.0),
        Point2::new(v0 * horizon, 0.0),
        w.position(),
        Point2::new(terminal_speed * horizon * ct, terminal_speed * horizon * st),
        horizon,
    );

    let v_limit = spec.v_max * (1.0 + 1e-12);
    let omega_limit = OMEGA_MARGIN * spec.omega_max;
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    for k in 0..=n {
        let s = k as f64 / n as f64;
        let t = k as f64 * spec.dt;
        let p = spline.position(s);
        if k == n && terminal_speed == 0.0 {
            states.push(RobotState::new(p.x, p.y, w.theta));
            break;
        }
        let u = spline.control(s)?;
        if u.v > v_limit {
            return Err(SplineError::SpeedBound { t, v: u.v });
        }
        if u.omega.abs() > omega_limit {
            return Err(SplineError::OmegaBound { t, omega: u.omega });
        }
        let phi = if k == 0 {
            0.0
        } else {
            wrap_angle(spline.heading(s))
        };
        // The velocity can pass through zero between samples without any
        // sample seeing a small speed; the heading then flips. Anything
        // turning faster than twice the bound between samples is treated
        // as such a reversal.
        if let Some(prev) = states.last() {
            let turn = wrap_angle(phi - prev.phi).abs();
            if turn > MAX_SAMPLE_TURN_FACTOR * spec.omega_max * spec.dt {
                return Err(SplineError::DegenerateHeading { t });
            }
        }
        states.push(RobotState {
            x: p.x,
            y: p.y,
            phi,
        });
        if k < n {
            controls.push(u);
        }
    }
    Ok(PlannedTrajectory {
        dt: spec.dt,
        horizon,
        states,
        controls,
        spline,
    })
}
