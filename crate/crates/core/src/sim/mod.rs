//! Closed-loop episode execution.
//!
//! An [`Agent`] proposes a segment of controls (one control horizon long)
//! from the current pose; the simulator executes it step by step, optionally
//! through LQR feedback, adds the configured actuation disturbance, clamps to
//! the vehicle bounds and integrates the vehicle model. After every step the
//! episode ends on collision, then success, then timeout.

mod metrics;
mod suite;

pub use metrics::{compute_metrics, Metrics, MetricsError};
pub use suite::{
    build_suite, make_agent, run_suite, sample_episodes, AgentKind, AgentRow, AgentSettings,
    BenchmarkReport, EpisodeSummary, SamplingConstraints, SuiteConfig,
};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp, step, ControlInput, RobotState, VehicleSpec};
use crate::expert::{
    CostFields, EpisodeError, EpisodeSpec, ExpertConfig, TrainingSample, WaypointPlanner,
};
use crate::geom::Point2;
use crate::grid::OccupancyGrid;
use crate::tracking::{feedback_control, solve_tvlqr, LqrGains, LqrWeights, Reference};

/// How a segment's controls reach the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    /// Replay the planned controls.
    #[default]
    OpenLoop,
    /// Track the rolled-out plan with time-varying LQR.
    Lqr(LqrWeights),
}

/// Actuation noise added to every commanded control before clamping.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceModel {
    #[default]
    None,
    GaussianControl {
        sigma_v: f64,
        sigma_omega: f64,
        seed: u64,
    },
}

impl DisturbanceModel {
    /// Same model reseeded for the `index`-th episode of a suite.
    pub fn for_episode(&self, index: u64) -> Self {
        match *self {
            DisturbanceModel::None => DisturbanceModel::None,
            DisturbanceModel::GaussianControl {
                sigma_v,
                sigma_omega,
                seed,
            } => DisturbanceModel::GaussianControl {
                sigma_v,
                sigma_omega,
                seed: seed.wrapping_add(index),
            },
        }
    }

    fn sampler(&self) -> Option<(Normal<f64>, Normal<f64>, ChaCha8Rng)> {
        match *self {
            DisturbanceModel::None => None,
            DisturbanceModel::GaussianControl {
                sigma_v,
                sigma_omega,
                seed,
            } => Some((
                Normal::new(0.0, sigma_v).expect("sigma_v must be finite and >= 0"),
                Normal::new(0.0, sigma_omega).expect("sigma_omega must be finite and >= 0"),
                ChaCha8Rng::seed_from_u64(seed),
            )),
        }
    }
}

/// Read-only view of the episode an agent acts in.
pub struct EpisodeContext<'a> {
    pub grid: &'a OccupancyGrid,
    /// Fields of the true map; privileged information.
    pub fields: &'a CostFields,
    pub goal: Point2,
    pub vehicle: &'a VehicleSpec,
    pub expert: &'a ExpertConfig,
}

impl EpisodeContext<'_> {
    pub fn segment_steps(&self) -> usize {
        self.vehicle.steps(self.expert.control_horizon)
    }
}

#[derive(Debug, Clone)]
pub enum Tracking {
    OpenLoop,
    Lqr {
        reference: Reference,
        gains: LqrGains,
    },
}

/// Controls for one control horizon, plus how to execute them.
#[derive(Debug, Clone)]
pub struct Segment {
    pub controls: Vec<ControlInput>,
    pub tracking: Tracking,
    /// World pose of the waypoint the segment heads for, if any.
    pub waypoint: Option<RobotState>,
}

impl Segment {
    /// Stand still for `steps` periods.
    pub fn hold(steps: usize) -> Self {
        Self {
            controls: vec![ControlInput::ZERO; steps],
            tracking: Tracking::OpenLoop,
            waypoint: None,
        }
    }

    /// Execute the first `steps` controls of a full plan starting at `z`.
    pub fn from_plan(
        z: &RobotState,
        plan_controls: &[ControlInput],
        steps: usize,
        waypoint: Option<RobotState>,
        execution: &Execution,
        dt: f64,
    ) -> Self {
        let controls = plan_controls[..steps.min(plan_controls.len())].to_vec();
        let tracking = match execution {
            Execution::OpenLoop => Tracking::OpenLoop,
            Execution::Lqr(weights) => {
                let reference = Reference::from_controls(z, plan_controls.to_vec(), dt);
                let gains =
                    solve_tvlqr(&reference, weights).expect("rolled-out reference is consistent");
                Tracking::Lqr { reference, gains }
            }
        };
        Self {
            controls,
            tracking,
            waypoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct AgentFailure(pub String);

pub trait Agent {
    fn name(&self) -> String;

    /// Plan the next segment from pose `z`, where `u` is the last applied control.
    fn plan(
        &mut self,
        ctx: &EpisodeContext<'_>,
        z: &RobotState,
        u: &ControlInput,
    ) -> Result<Segment, AgentFailure>;
}

/// The sampling expert acting on the true map.
pub struct ExpertAgent {
    planner: Arc<dyn WaypointPlanner>,
    execution: Execution,
    record: bool,
    samples: Vec<TrainingSample>,
}

impl ExpertAgent {
    pub fn new(planner: Arc<dyn WaypointPlanner>, execution: Execution) -> Self {
        Self {
            planner,
            execution,
            record: false,
            samples: Vec::new(),
        }
    }

    /// Keep a [`TrainingSample`] for every replan.
    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn take_samples(&mut self) -> Vec<TrainingSample> {
        std::mem::take(&mut self.samples)
    }
}

impl Agent for ExpertAgent {
    fn name(&self) -> String {
        match self.execution {
            Execution::OpenLoop => "expert".into(),
            Execution::Lqr(_) => "expert-lqr".into(),
        }
    }

    fn plan(
        &mut self,
        ctx: &EpisodeContext<'_>,
        z: &RobotState,
        u: &ControlInput,
    ) -> Result<Segment, AgentFailure> {
        let plan = self
            .planner
            .plan(z, u, ctx.fields, ctx.expert, ctx.vehicle)
            .map_err(|e| AgentFailure(e.to_string()))?;
        let steps = ctx.segment_steps();
        if self.record {
            self.samples.push(TrainingSample {
                step: self.samples.len(),
                pose: *z,
                goal_rel: z.to_ego(ctx.goal),
                control: *u,
                waypoint: plan.waypoint,
                control_seq: plan.trajectory.controls[..steps].to_vec(),
                planned_cost: plan.cost,
            });
        }
        let w = plan.waypoint;
        let waypoint = z.compose(&RobotState::new(w.x, w.y, w.theta));
        Ok(Segment::from_plan(
            z,
            &plan.trajectory.controls,
            steps,
            Some(waypoint),
            &self.execution,
            ctx.vehicle.dt,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    Failure,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
            Outcome::Failure => "failure",
        }
    }
}

/// World-frame record of an executed episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutedTrajectory {
    pub dt: f64,
    /// `n + 1` states, starting at the episode start.
    pub states: Vec<RobotState>,
    /// `n` applied (disturbed and clamped) controls.
    pub controls: Vec<ControlInput>,
    /// Controls the agent asked for before disturbance and clamping.
    pub commanded: Vec<ControlInput>,
    /// Sampled obstacle and goal distance at each state.
    pub d_obs: Vec<f64>,
    pub d_goal: Vec<f64>,
    /// World poses of the waypoints chosen at each replan.
    pub waypoints: Vec<RobotState>,
    /// Step indices at which each replan happened.
    pub replan_steps: Vec<usize>,
}

impl ExecutedTrajectory {
    pub fn path_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[0].position().distance(w[1].position()))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    /// Seconds from episode start; successes only.
    pub time_to_goal: Option<f64>,
    pub elapsed: f64,
    pub trajectory: ExecutedTrajectory,
    /// `None` when fewer than three controls were executed.
    pub metrics: Option<Metrics>,
    pub failure: Option<String>,
    /// Steps on which clamping changed the commanded (disturbed) control.
    pub saturations: usize,
}

impl EpisodeResult {
    pub fn replans(&self) -> usize {
        self.trajectory.replan_steps.len()
    }
}

/// Run one episode to termination.
pub fn run_episode(
    agent: &mut dyn Agent,
    ep: &EpisodeSpec,
    disturbance: &DisturbanceModel,
) -> Result<EpisodeResult, EpisodeError> {
    let fields = ep.fields()?;
    ep.validate(&fields)?;
    Ok(run_episode_with_fields(agent, ep, &fields, disturbance))
}

/// [`run_episode`] on prebuilt true-map fields, skipping validation.
pub fn run_episode_with_fields(
    agent: &mut dyn Agent,
    ep: &EpisodeSpec,
    fields: &CostFields,
    disturbance: &DisturbanceModel,
) -> EpisodeResult {
    let ctx = EpisodeContext {
        grid: &ep.grid,
        fields,
        goal: ep.goal,
        vehicle: &ep.vehicle,
        expert: &ep.expert,
    };
    let spec = ep.vehicle;
    let cfg = &ep.expert;
    let dt = spec.dt;
    let max_steps = spec.steps(cfg.max_episode_time);
    let mut noise = disturbance.sampler();

    let mut traj = ExecutedTrajectory {
        dt,
        ..Default::default()
    };
    let mut z = ep.start;
    let mut u = ControlInput::ZERO;
    let mut saturations = 0;
    traj.states.push(z);
    traj.d_obs.push(fields.obstacle_distance(z.position()));
    traj.d_goal.push(fields.goal_distance(z.position()));

    let check = |z: &RobotState, d_obs: f64, k: usize| -> Option<Outcome> {
        if d_obs <= cfg.robot_radius {
            Some(Outcome::Collision)
        } else if z.position().distance(ep.goal) <= cfg.success_radius {
            Some(Outcome::Success)
        } else if k >= max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        }
    };

    let mut failure = None;
    let mut outcome = check(&z, traj.d_obs[0], 0);
    while outcome.is_none() {
        let segment = match agent.plan(&ctx, &z, &u) {
            Ok(s) if !s.controls.is_empty() => s,
            Ok(_) => {
                failure = Some("agent returned an empty segment".to_string());
                outcome = Some(Outcome::Failure);
                break;
            }
            Err(e) => {
                failure = Some(e.0);
                outcome = Some(Outcome::Failure);
                break;
            }
        };
        traj.replan_steps.push(traj.controls.len());
        if let Some(w) = segment.waypoint {
            traj.waypoints.push(w);
        }
        for k in 0..segment.controls.len() {
            let cmd = match &segment.tracking {
                Tracking::OpenLoop => segment.controls[k],
                Tracking::Lqr { reference, gains } => {
                    feedback_control(&z, k, reference, gains, &spec)
                }
            };
            let disturbed = match noise.as_mut() {
                Some((nv, nw, rng)) => {
                    ControlInput::new(cmd.v + nv.sample(rng), cmd.omega + nw.sample(rng))
                }
                None => cmd,
            };
            let applied = clamp(&disturbed, &spec);
            if applied != disturbed {
                saturations += 1;
            }
            z = step(&z, &applied, dt);
            u = applied;
            traj.commanded.push(cmd);
            traj.controls.push(applied);
            traj.states.push(z);
            let d_obs = fields.obstacle_distance(z.position());
            traj.d_obs.push(d_obs);
            traj.d_goal.push(fields.goal_distance(z.position()));
            outcome = check(&z, d_obs, traj.controls.len());
            if outcome.is_some() {
                break;
            }
        }
    }

    let outcome = outcome.expect("loop exits with an outcome");
    let elapsed = traj.controls.len() as f64 * dt;
    let metrics = compute_metrics(&traj).ok();
    EpisodeResult {
        outcome,
        time_to_goal: (outcome == Outcome::Success).then_some(elapsed),
        elapsed,
        trajectory: traj,
        metrics,
        failure,
        saturations,
    }
}
