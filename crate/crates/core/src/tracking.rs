//! Time-varying LQR around a reference trajectory.
//!
//! The reference is produced by the same Euler model used for
//! linearization, so the affine residual of the error dynamics vanishes and
//! the feedforward term is identically zero. [`solve_tvlqr`] checks that
//! residual instead of silently absorbing it.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{clamp, linearize, step, wrap_angle, ControlInput, RobotState, VehicleSpec};

/// Reference residual above which a trajectory is not dynamically consistent.
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("reference needs {expected} states for {controls} controls, got {states}")]
    Length {
        states: usize,
        controls: usize,
        expected: usize,
    },
    #[error("reference violates the discrete dynamics at step {step} (residual {residual:.3e})")]
    Inconsistent { step: usize, residual: f64 },
    #[error("R + B'PB is singular at step {0}")]
    Singular(usize),
    #[error("invalid weights: {0}")]
    Weights(String),
}

/// Quadratic weights on state error, control deviation and terminal error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrWeights {
    pub q: [[f64; 3]; 3],
    pub r: [[f64; 2]; 2],
    pub q_final: [[f64; 3]; 3],
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]],
            r: [[1.0, 0.0], [0.0, 1.0]],
            q_final: [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 5.0]],
        }
    }
}

impl LqrWeights {
    pub fn q(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.q[i][j])
    }

    pub fn r(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.r[i][j])
    }

    pub fn q_final(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.q_final[i][j])
    }

    /// Same weights with `R` multiplied by `factor`.
    pub fn scale_r(&self, factor: f64) -> Self {
        let mut w = self.clone();
        for row in &mut w.r {
            for v in row {
                *v *= factor;
            }
        }
        w
    }

    pub fn validate(&self) -> Result<(), LqrError> {
        let sym3 = |m: &Matrix3<f64>| (m - m.transpose()).abs().max() <= 1e-12;
        let q = self.q();
        let qf = self.q_final();
        let r = self.r();
        if !sym3(&q) || !sym3(&qf) || (r - r.transpose()).abs().max() > 1e-12 {
            return Err(LqrError::Weights("weights must be symmetric".into()));
        }
        let psd = |m: Matrix3<f64>| m.symmetric_eigenvalues().iter().all(|&e| e >= -1e-12);
        if !psd(q) || !psd(qf) {
            return Err(LqrError::Weights(
                "Q and Q_final must be positive semidefinite".into(),
            ));
        }
        if r.cholesky().is_none() {
            return Err(LqrError::Weights("R must be positive definite".into()));
        }
        Ok(())
    }
}

/// A world-frame state/control reference sampled at `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub dt: f64,
    pub states: Vec<RobotState>,
    pub controls: Vec<ControlInput>,
}

impl Reference {
    /// Roll `controls` out from `start` with the vehicle model.
    pub fn from_controls(start: &RobotState, controls: Vec<ControlInput>, dt: f64) -> Self {
        let states = crate::dynamics::rollout(start, &controls, dt);
        Self {
            dt,
            states,
            controls,
        }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

/// Per-step feedforward `k_t` and feedback `K_t`; `u = u*_t + k_t + K_t e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrGains {
    pub feedforward: Vec<Vector2<f64>>,
    pub feedback: Vec<Matrix2x3<f64>>,
}

impl LqrGains {
    pub fn len(&self) -> usize {
        self.feedback.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feedback.is_empty()
    }
}

/// Backward Riccati recursion on the dynamics linearized along `reference`.
pub fn solve_tvlqr(reference: &Reference, weights: &LqrWeights) -> Result<LqrGains, LqrError> {
    let n = reference.controls.len();
    if reference.states.len() != n + 1 {
        return Err(LqrError::Length {
            states: reference.states.len(),
            controls: n,
            expected: n + 1,
        });
    }
    for t in 0..n {
        let next = step(&reference.states[t], &reference.controls[t], reference.dt);
        let target = &reference.states[t + 1];
        let residual = (next.x - target.x)
            .abs()
            .max((next.y - target.y).abs())
            .max(wrap_angle(next.phi - target.phi).abs());
        if residual > CONSISTENCY_TOL {
            return Err(LqrError::Inconsistent { step: t, residual });
        }
    }

    let q = weights.q();
    let r = weights.r();
    let mut p = weights.q_final();
    let mut feedback = vec![Matrix2x3::zeros(); n];
    for t in (0..n).rev() {
        let (a, b) = linearize(&reference.states[t], &reference.controls[t], reference.dt);
        let bt_p = b.transpose() * p;
        let s = r + bt_p * b;
        let s_inv = s.try_inverse().ok_or(LqrError::Singular(t))?;
        let k = -(s_inv * bt_p * a);
        p = q + a.transpose() * p * (a + b * k);
        p = 0.5 * (p + p.transpose());
        feedback[t] = k;
    }
    Ok(LqrGains {
        feedforward: vec![Vector2::zeros(); n],
        feedback,
    })
}

/// State error with the heading difference wrapped to `(-pi, pi]`.
pub fn tracking_error(z: &RobotState, reference: &RobotState) -> Vector3<f64> {
    Vector3::new(
        z.x - reference.x,
        z.y - reference.y,
        wrap_angle(z.phi - reference.phi),
    )
}

/// Saturated LQR control at reference index `t`.
pub fn feedback_control(
    z: &RobotState,
    t: usize,
    reference: &Reference,
    gains: &LqrGains,
    spec: &VehicleSpec,
) -> ControlInput {
    let e = tracking_error(z, &reference.states[t]);
    let du = gains.feedforward[t] + gains.feedback[t] * e;
    let u_ref = reference.controls[t];
    clamp(
        &ControlInput::new(u_ref.v + du[0], u_ref.omega + du[1]),
        spec,
    )
}
