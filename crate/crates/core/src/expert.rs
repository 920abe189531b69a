//! Sampling MPC expert.
//!
//! The stage cost penalizes obstacle proximity cubically inside a margin
//! `lambda1` and goal distance quadratically:
//!
//! ```text
//! J_i = max(0, lambda1 - d_obs(x_i, y_i))^3 + lambda2 * d_goal(x_i, y_i)^2
//! ```
//!
//! At each replan the expert fits a spline to every waypoint of a fixed
//! candidate lattice inside the ground-projected field of view, sums the
//! stage cost over the planning horizon, and keeps the cheapest feasible
//! candidate. Only the first control horizon of the winner is executed
//! before replanning.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlInput, RobotState, VehicleSpec};
use crate::geom::Point2;
use crate::grid::{
    fmm_distance, sample_field, signed_distance_field, GridError, OccupancyGrid, ScalarField,
};
use crate::sim::{self, DisturbanceModel, EpisodeResult, Execution};
use crate::spline::{fit_spline, PlannedTrajectory, Waypoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Obstacle margin, m.
    pub lambda1: f64,
    /// Weight of the squared goal distance.
    pub lambda2: f64,
    /// Spline duration used to score candidates (H1), s.
    pub planning_horizon: f64,
    /// Portion of each plan executed before replanning (H), s.
    pub control_horizon: f64,
    pub r_min: f64,
    /// Defaults to `v_max * planning_horizon`.
    pub r_max: Option<f64>,
    pub n_r: usize,
    pub n_bearing: usize,
    pub n_theta: usize,
    /// Angular width of the waypoint sampling sector, rad.
    pub fov: f64,
    /// Half-width of the heading window around each bearing, rad.
    pub heading_window: f64,
    /// Spline arrival speed; defaults to `v_max / 2`.
    pub terminal_speed: Option<f64>,
    pub success_radius: f64,
    pub max_episode_time: f64,
    /// Collision when the sampled obstacle distance drops to this value.
    pub robot_radius: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.3,
            lambda2: 1.0,
            planning_horizon: 6.0,
            control_horizon: 1.5,
            r_min: 0.3,
            r_max: None,
            n_r: 10,
            n_bearing: 15,
            n_theta: 7,
            fov: PI / 2.0,
            heading_window: PI / 3.0,
            terminal_speed: None,
            success_radius: 0.3,
            max_episode_time: 90.0,
            robot_radius: 0.0,
        }
    }
}

impl ExpertConfig {
    pub fn r_max(&self, spec: &VehicleSpec) -> f64 {
        self.r_max.unwrap_or(spec.v_max * self.planning_horizon)
    }

    pub fn terminal_speed(&self, spec: &VehicleSpec) -> f64 {
        self.terminal_speed.unwrap_or(0.5 * spec.v_max)
    }

    /// Copy with every optional default filled in for `spec`.
    pub fn resolved(&self, spec: &VehicleSpec) -> ExpertConfig {
        ExpertConfig {
            r_max: Some(self.r_max(spec)),
            terminal_speed: Some(self.terminal_speed(spec)),
            ..self.clone()
        }
    }

    pub fn validate(&self, spec: &VehicleSpec) -> Result<(), String> {
        let positive = [
            ("lambda1", self.lambda1),
            ("planning_horizon", self.planning_horizon),
            ("control_horizon", self.control_horizon),
            ("r_min", self.r_min),
            ("success_radius", self.success_radius),
            ("max_episode_time", self.max_episode_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("expert.{name} must be > 0, got {v}"));
            }
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(format!("expert.lambda2 must be >= 0, got {}", self.lambda2));
        }
        if self.control_horizon > self.planning_horizon {
            return Err("expert.control_horizon must not exceed expert.planning_horizon".into());
        }
        if self.r_max(spec) < self.r_min {
            return Err("expert.r_max must be >= expert.r_min".into());
        }
        for (name, n) in [
            ("n_r", self.n_r),
            ("n_bearing", self.n_bearing),
            ("n_theta", self.n_theta),
        ] {
            if n == 0 {
                return Err(format!("expert.{name} must be >= 1"));
            }
        }
        if !(self.fov >= 0.0 && self.heading_window >= 0.0) {
            return Err("expert.fov and expert.heading_window must be >= 0".into());
        }
        let vf = self.terminal_speed(spec);
        if !(0.0..=spec.v_max).contains(&vf) {
            return Err(format!(
                "expert.terminal_speed must lie in [0, v_max], got {vf}"
            ));
        }
        if self.robot_radius < 0.0 {
            return Err("expert.robot_radius must be >= 0".into());
        }
        Ok(())
    }
}

/// Obstacle and goal distance fields for one episode.
#[derive(Debug, Clone)]
pub struct CostFields {
    pub sdf: ScalarField,
    pub fmm: ScalarField,
    pub goal: Point2,
}

impl CostFields {
    pub fn build(grid: &OccupancyGrid, goal: Point2) -> Result<Self, GridError> {
        Ok(Self {
            sdf: signed_distance_field(grid),
            fmm: fmm_distance(grid, goal)?,
            goal,
        })
    }

    pub fn obstacle_distance(&self, p: Point2) -> f64 {
        sample_field(&self.sdf, p)
    }

    pub fn goal_distance(&self, p: Point2) -> f64 {
        sample_field(&self.fmm, p)
    }
}

/// Cost of occupying world position `p`; `+inf` where the goal is unreachable.
pub fn stage_cost(p: Point2, sdf: &ScalarField, fmm: &ScalarField, cfg: &ExpertConfig) -> f64 {
    let d_goal = sample_field(fmm, p);
    if d_goal == f64::INFINITY {
        return f64::INFINITY;
    }
    let d_obs = sample_field(sdf, p);
    (cfg.lambda1 - d_obs).max(0.0).powi(3) + cfg.lambda2 * d_goal * d_goal
}

/// Summed stage cost of an ego-frame trajectory placed at `origin`.
pub fn trajectory_cost(
    traj: &PlannedTrajectory,
    origin: &RobotState,
    fields: &CostFields,
    cfg: &ExpertConfig,
) -> f64 {
    let mut total = 0.0;
    for s in &traj.states {
        let c = stage_cost(origin.from_ego(s.position()), &fields.sdf, &fields.fmm, cfg);
        if c == f64::INFINITY {
            return f64::INFINITY;
        }
        total += c;
    }
    total
}

fn spread(lo: f64, hi: f64, n: usize, single: f64) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |k| {
        if n == 1 {
            single
        } else if k + 1 == n {
            hi
        } else {
            lo + k as f64 * step
        }
    })
}

/// Candidate waypoints, radius-major, then bearing, then heading.
///
/// Radii span `[r_min, r_max]` (a single radius is `r_min`), bearings span
/// the field of view symmetrically, headings span `bearing ± heading_window`.
/// A single bearing or heading sits at the center of its range.
pub fn sample_waypoints(cfg: &ExpertConfig, spec: &VehicleSpec) -> Vec<Waypoint> {
    let half = 0.5 * cfg.fov;
    let mut out = Vec::with_capacity(cfg.n_r * cfg.n_bearing * cfg.n_theta);
    for r in spread(cfg.r_min, cfg.r_max(spec), cfg.n_r, cfg.r_min) {
        for b in spread(-half, half, cfg.n_bearing, 0.0) {
            let (sb, cb) = b.sin_cos();
            for theta in spread(
                b - cfg.heading_window,
                b + cfg.heading_window,
                cfg.n_theta,
                b,
            ) {
                out.push(Waypoint::new(r * cb, r * sb, theta));
            }
        }
    }
    out
}

/// The chosen candidate of one replan.
#[derive(Debug, Clone)]
pub struct Plan {
    pub waypoint: Waypoint,
    /// Ego-frame trajectory over the planning horizon.
    pub trajectory: PlannedTrajectory,
    pub cost: f64,
    /// Position of the waypoint in [`sample_waypoints`] order.
    pub candidate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no feasible waypoint among {candidates} candidates")]
pub struct NoFeasibleWaypoint {
    pub candidates: usize,
}

/// Score one candidate; `None` when infeasible or unreachable.
pub fn evaluate_candidate(
    w: &Waypoint,
    z: &RobotState,
    u: &ControlInput,
    fields: &CostFields,
    cfg: &ExpertConfig,
    spec: &VehicleSpec,
) -> Option<(f64, PlannedTrajectory)> {
    let traj = fit_spline(w, u, cfg.planning_horizon, spec, cfg.terminal_speed(spec)).ok()?;
    let cost = trajectory_cost(&traj, z, fields, cfg);
    cost.is_finite().then_some((cost, traj))
}

/// Minimum-cost feasible waypoint from pose `z` at control `u`.
/// Ties go to the earliest candidate.
pub fn plan_waypoint(
    z: &RobotState,
    u: &ControlInput,
    fields: &CostFields,
    cfg: &ExpertConfig,
    spec: &VehicleSpec,
) -> Result<Plan, NoFeasibleWaypoint> {
    let candidates = sample_waypoints(cfg, spec);
    candidates
        .par_iter()
        .enumerate()
        .filter_map(|(idx, w)| {
            evaluate_candidate(w, z, u, fields, cfg, spec).map(|(cost, traj)| (cost, idx, traj))
        })
        .reduce_with(|a, b| match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
            std::cmp::Ordering::Greater => b,
            _ => a,
        })
        .map(|(cost, idx, trajectory)| Plan {
            waypoint: candidates[idx],
            trajectory,
            cost,
            candidate: idx,
        })
        .ok_or(NoFeasibleWaypoint {
            candidates: candidates.len(),
        })
}

/// Waypoint selection strategy shared by the expert and the mapping agents.
pub trait WaypointPlanner: Send + Sync {
    fn plan(
        &self,
        z: &RobotState,
        u: &ControlInput,
        fields: &CostFields,
        cfg: &ExpertConfig,
        spec: &VehicleSpec,
    ) -> Result<Plan, NoFeasibleWaypoint>;
}

/// [`plan_waypoint`] as a [`WaypointPlanner`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SamplingPlanner;

impl WaypointPlanner for SamplingPlanner {
    fn plan(
        &self,
        z: &RobotState,
        u: &ControlInput,
        fields: &CostFields,
        cfg: &ExpertConfig,
        spec: &VehicleSpec,
    ) -> Result<Plan, NoFeasibleWaypoint> {
        plan_waypoint(z, u, fields, cfg, spec)
    }
}

pub fn default_planner() -> Arc<dyn WaypointPlanner> {
    Arc::new(SamplingPlanner)
}

/// One navigation task.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub grid: Arc<OccupancyGrid>,
    pub start: RobotState,
    pub goal: Point2,
    pub vehicle: VehicleSpec,
    pub expert: ExpertConfig,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid episode: {0}")]
    Invalid(String),
}

impl EpisodeSpec {
    pub fn fields(&self) -> Result<CostFields, GridError> {
        CostFields::build(&self.grid, self.goal)
    }

    /// Check the start clearance and goal reachability on prebuilt fields.
    pub fn validate(&self, fields: &CostFields) -> Result<(), EpisodeError> {
        self.vehicle.validate().map_err(EpisodeError::Invalid)?;
        self.expert
            .validate(&self.vehicle)
            .map_err(EpisodeError::Invalid)?;
        let clearance = fields.obstacle_distance(self.start.position());
        if clearance <= self.expert.lambda1 {
            return Err(EpisodeError::Invalid(format!(
                "start clearance {clearance:.3} m does not exceed lambda1 {}",
                self.expert.lambda1
            )));
        }
        Ok(())
    }
}

/// One supervision record, emitted at each replan before execution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub step: usize,
    /// World pose at the replan.
    pub pose: RobotState,
    /// Goal in the ego frame of `pose`.
    pub goal_rel: Point2,
    /// Control the plan starts from.
    pub control: ControlInput,
    pub waypoint: Waypoint,
    /// The executed prefix of the plan (control horizon worth of controls).
    pub control_seq: Vec<ControlInput>,
    pub planned_cost: f64,
}

#[derive(Debug, Clone)]
pub struct ExpertEpisode {
    pub result: EpisodeResult,
    pub samples: Vec<TrainingSample>,
}

/// Receding-horizon expert run with open-loop execution of each plan prefix.
pub fn run_expert_episode(ep: &EpisodeSpec) -> Result<ExpertEpisode, EpisodeError> {
    let mut agent = sim::ExpertAgent::new(default_planner(), Execution::OpenLoop).recording();
    let result = sim::run_episode(&mut agent, ep, &DisturbanceModel::None)?;
    Ok(ExpertEpisode {
        result,
        samples: agent.take_samples(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldKind, GridGeometry};

    fn constant_fields(d_obs: f64, d_goal: f64) -> (ScalarField, ScalarField) {
        let g = GridGeometry::new(1.0, Point2::default(), 3, 3).unwrap();
        (
            ScalarField::from_values(g, FieldKind::ObstacleDistance, vec![d_obs; 9]),
            ScalarField::from_values(g, FieldKind::GoalDistance, vec![d_goal; 9]),
        )
    }

    #[test]
    fn stage_cost_examples() {
        let cfg = ExpertConfig::default();
        let p = Point2::new(1.0, 1.0);
        let (sdf, fmm) = constant_fields(0.5, 0.0);
        assert_eq!(stage_cost(p, &sdf, &fmm, &cfg), 0.0);

        let (sdf, fmm) = constant_fields(0.2, 2.0);
        let c = stage_cost(p, &sdf, &fmm, &cfg);
        assert!((c - 4.001).abs() < 1e-12, "{c}");

        let (sdf, fmm) = constant_fields(0.3, 1.5);
        assert_eq!(stage_cost(p, &sdf, &fmm, &cfg), 2.25);

        let (sdf, fmm) = constant_fields(1.0, f64::INFINITY);
        assert_eq!(stage_cost(p, &sdf, &fmm, &cfg), f64::INFINITY);
    }

    #[test]
    fn single_candidate_lattice() {
        let cfg = ExpertConfig {
            n_r: 1,
            n_bearing: 1,
            n_theta: 1,
            fov: 2.0,
            ..Default::default()
        };
        let w = sample_waypoints(&cfg, &VehicleSpec::default());
        assert_eq!(w, vec![Waypoint::new(cfg.r_min, 0.0, 0.0)]);
    }

    #[test]
    fn lattice_order_and_bounds() {
        let cfg = ExpertConfig::default();
        let spec = VehicleSpec::default();
        let w = sample_waypoints(&cfg, &spec);
        assert_eq!(w.len(), 10 * 15 * 7);
        for c in &w {
            let r = c.x.hypot(c.y);
            assert!(r >= cfg.r_min - 1e-12 && r <= 3.6 + 1e-12);
            assert!(c.y.atan2(c.x).abs() <= cfg.fov / 2.0 + 1e-12);
        }
        // radius-major: first n_bearing * n_theta candidates share r_min
        assert!(w[..105]
            .iter()
            .all(|c| (c.x.hypot(c.y) - 0.3).abs() < 1e-12));
        assert!((w[0].theta - (-PI / 4.0 - PI / 3.0)).abs() < 1e-12);
        assert!((w[6].theta - (-PI / 4.0 + PI / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let spec = VehicleSpec::default();
        assert!(ExpertConfig::default().validate(&spec).is_ok());
        assert!(ExpertConfig {
            control_horizon: 7.0,
            ..Default::default()
        }
        .validate(&spec)
        .is_err());
        assert!(ExpertConfig {
            n_theta: 0,
            ..Default::default()
        }
        .validate(&spec)
        .is_err());
        assert!(ExpertConfig {
            r_min: 0.0,
            ..Default::default()
        }
        .validate(&spec)
        .is_err());
    }
}
