//! Discretized unicycle (Dubins car) model with explicit Euler stepping.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix3x2};
use serde::{Deserialize, Serialize};

use crate::geom::Point2;

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Planar pose. `phi` is kept wrapped to `(-pi, pi]` by every operation here.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.phi.is_finite()
    }

    /// Express a world point in this pose's ego frame.
    pub fn to_ego(&self, p: Point2) -> Point2 {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (p.x - self.x, p.y - self.y);
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Map an ego-frame point to the world frame.
    pub fn from_ego(&self, p: Point2) -> Point2 {
        let (s, c) = self.phi.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Map an ego-frame pose to the world frame.
    pub fn compose(&self, ego: &RobotState) -> RobotState {
        let p = self.from_ego(ego.position());
        RobotState::new(p.x, p.y, self.phi + ego.phi)
    }
}

/// Commanded forward speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn within(&self, spec: &VehicleSpec) -> bool {
        (0.0..=spec.v_max).contains(&self.v) && self.omega.abs() <= spec.omega_max
    }
}

/// Control bounds and discretization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSpec {
    /// Maximum forward speed, m/s.
    pub v_max: f64,
    /// Maximum absolute turn rate, rad/s.
    pub omega_max: f64,
    /// Control period, s.
    pub dt: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            v_max: 0.6,
            omega_max: 1.1,
            dt: 0.05,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("vehicle.{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Number of control periods in `duration` seconds.
    pub fn steps(&self, duration: f64) -> usize {
        (duration / self.dt).round() as usize
    }
}

/// One explicit Euler step.
pub fn step(z: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    let (s, c) = z.phi.sin_cos();
    RobotState {
        x: z.x + dt * u.v * c,
        y: z.y + dt * u.v * s,
        phi: wrap_angle(z.phi + dt * u.omega),
    }
}

/// Saturate a control to the vehicle bounds. Forward motion only.
pub fn clamp(u: &ControlInput, spec: &VehicleSpec) -> ControlInput {
    ControlInput {
        v: u.v.clamp(0.0, spec.v_max),
        omega: u.omega.clamp(-spec.omega_max, spec.omega_max),
    }
}

/// Jacobians of [`step`] with respect to state and control.
pub fn linearize(z: &RobotState, u: &ControlInput, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let (s, c) = z.phi.sin_cos();
    #[rustfmt::skip]
    let a = Matrix3::new(
        1.0, 0.0, -dt * u.v * s,
        0.0, 1.0,  dt * u.v * c,
        0.0, 0.0,  1.0,
    );
    #[rustfmt::skip]
    let b = Matrix3x2::new(
        dt * c, 0.0,
        dt * s, 0.0,
        0.0,    dt,
    );
    (a, b)
}

/// Euler-integrate a control sequence from `z0`; returns `controls.len() + 1` states.
pub fn rollout(z0: &RobotState, controls: &[ControlInput], dt: f64) -> Vec<RobotState> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*z0);
    let mut z = *z0;
    for u in controls {
        z = step(&z, u, dt);
        states.push(z);
    }
    states
}
