//! Comparison agents: geometric mapping with and without memory, and a
//! waypoint-predictor seam standing in for a learned perception module.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::{observe, Observation};
use crate::dynamics::{ControlInput, RobotState, VehicleSpec};
use crate::expert::{plan_waypoint, CostFields, WaypointPlanner};
use crate::geom::Point2;
use crate::grid::{raycast_depth, scan_bearings, GridGeometry, OccupancyGrid, RayWalk};
use crate::sim::{Agent, AgentFailure, EpisodeContext, Execution, Segment};
use crate::spline::{fit_spline, Waypoint};
use crate::tracking::LqrWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Belief {
    Unknown,
    Free,
    Occupied,
}

/// Planar depth sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub fov: f64,
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_2,
            n_rays: 128,
            max_range: 3.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov > 0.0 && self.fov <= 2.0 * std::f64::consts::PI) {
            return Err(format!("sensor.fov must be in (0, 2π], got {}", self.fov));
        }
        if self.n_rays == 0 {
            return Err("sensor.n_rays must be at least 1".into());
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(format!(
                "sensor.max_range must be positive, got {}",
                self.max_range
            ));
        }
        Ok(())
    }

    pub fn scan(&self, grid: &OccupancyGrid, z: &RobotState) -> Vec<f64> {
        raycast_depth(grid, z, self.fov, self.n_rays, self.max_range)
    }
}

/// Occupancy belief over the world grid's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    geometry: GridGeometry,
    cells: Vec<Belief>,
}

impl BeliefGrid {
    pub fn unknown(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![Belief::Unknown; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[Belief] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> Belief {
        self.cells[self.geometry.index(i, j)]
    }

    pub fn reset(&mut self) {
        self.cells.fill(Belief::Unknown);
    }

    pub fn count(&self, b: Belief) -> usize {
        self.cells.iter().filter(|&&c| c == b).count()
    }

    fn mark(&mut self, i: usize, j: usize, b: Belief) {
        let c = &mut self.cells[self.geometry.index(i, j)];
        if *c != Belief::Occupied {
            *c = b;
        }
    }

    /// Fuse one scan taken at `z`. Cells a ray crosses before its return
    /// become free; the return cell becomes occupied unless the ray ran out
    /// of range. Occupied cells stay occupied.
    pub fn fuse_scan(&mut self, z: &RobotState, ranges: &[f64], sensor: &SensorConfig) {
        for (bearing, &range) in scan_bearings(z.phi, sensor.fov, sensor.n_rays).zip(ranges) {
            for (cell, t) in RayWalk::new(&self.geometry, z.position(), bearing, sensor.max_range) {
                let Some((i, j)) = cell else { break };
                if t < range {
                    self.mark(i, j, Belief::Free);
                } else {
                    if range < sensor.max_range {
                        self.mark(i, j, Belief::Occupied);
                    }
                    break;
                }
            }
        }
    }

    /// Optimistic planning map: unknown cells count as free.
    pub fn planning_grid(&self) -> OccupancyGrid {
        let cells = self.cells.iter().map(|&c| c == Belief::Occupied).collect();
        OccupancyGrid::from_cells(self.geometry, cells).expect("belief geometry matches its cells")
    }
}

/// Geometric mapping baseline: scan, fuse, then plan on the belief with the
/// expert's waypoint planner.
pub struct MappingAgent {
    memory: bool,
    sensor: SensorConfig,
    planner: Arc<dyn WaypointPlanner>,
    execution: Execution,
    belief: Option<BeliefGrid>,
    last_plan_grid: Option<OccupancyGrid>,
}

impl MappingAgent {
    pub fn new(
        memory: bool,
        sensor: SensorConfig,
        planner: Arc<dyn WaypointPlanner>,
        execution: Execution,
    ) -> Self {
        Self {
            memory,
            sensor,
            planner,
            execution,
            belief: None,
            last_plan_grid: None,
        }
    }

    pub fn belief(&self) -> Option<&BeliefGrid> {
        self.belief.as_ref()
    }

    /// The planning grid used at the most recent replan.
    pub fn last_planning_grid(&self) -> Option<&OccupancyGrid> {
        self.last_plan_grid.as_ref()
    }
}

impl Agent for MappingAgent {
    fn name(&self) -> String {
        if self.memory {
            "mapping-memory".into()
        } else {
            "mapping-memoryless".into()
        }
    }

    fn plan(
        &mut self,
        ctx: &EpisodeContext<'_>,
        z: &RobotState,
        u: &ControlInput,
    ) -> Result<Segment, AgentFailure> {
        let belief = self
            .belief
            .get_or_insert_with(|| BeliefGrid::unknown(*ctx.grid.geometry()));
        if !self.memory {
            belief.reset();
        }
        let ranges = self.sensor.scan(ctx.grid, z);
        belief.fuse_scan(z, &ranges, &self.sensor);
        let planning = belief.planning_grid();
        let steps = ctx.segment_steps();
        let segment = match plan_on_grid(self.planner.as_ref(), &planning, ctx, z, u) {
            Some(plan) => {
                let w = plan.waypoint;
                let waypoint = z.compose(&RobotState::new(w.x, w.y, w.theta));
                Segment::from_plan(
                    z,
                    &plan.trajectory.controls,
                    steps,
                    Some(waypoint),
                    &self.execution,
                    ctx.vehicle.dt,
                )
            }
            None => Segment::hold(steps),
        };
        self.last_plan_grid = Some(planning);
        Ok(segment)
    }
}

fn plan_on_grid(
    planner: &dyn WaypointPlanner,
    planning: &OccupancyGrid,
    ctx: &EpisodeContext<'_>,
    z: &RobotState,
    u: &ControlInput,
) -> Option<crate::expert::Plan> {
    let fields = CostFields::build(planning, ctx.goal).ok()?;
    planner.plan(z, u, &fields, ctx.expert, ctx.vehicle).ok()
}

/// Stand-in for a learned perception module: maps an observation, the
/// ego-frame goal and the current control to an ego-frame waypoint.
pub trait WaypointPredictor {
    fn name(&self) -> String;

    fn predict(&mut self, obs: &Observation, goal_rel: Point2, u: &ControlInput) -> Waypoint;
}

/// Runs a [`WaypointPredictor`] through the spline planner with LQR tracking.
pub struct PredictorAgent<P> {
    predictor: P,
    sensor: SensorConfig,
    weights: LqrWeights,
}

impl<P: WaypointPredictor> PredictorAgent<P> {
    pub fn new(predictor: P, sensor: SensorConfig, weights: LqrWeights) -> Self {
        Self {
            predictor,
            sensor,
            weights,
        }
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }
}

impl<P: WaypointPredictor> Agent for PredictorAgent<P> {
    fn name(&self) -> String {
        self.predictor.name()
    }

    fn plan(
        &mut self,
        ctx: &EpisodeContext<'_>,
        z: &RobotState,
        u: &ControlInput,
    ) -> Result<Segment, AgentFailure> {
        let obs = observe(ctx.grid, z, &self.sensor);
        let w = self.predictor.predict(&obs, z.to_ego(ctx.goal), u);
        if !w.is_finite() {
            return Err(AgentFailure(format!(
                "predictor returned a non-finite waypoint {w:?}"
            )));
        }
        let steps = ctx.segment_steps();
        let spec: &VehicleSpec = ctx.vehicle;
        match fit_spline(
            &w,
            u,
            ctx.expert.planning_horizon,
            spec,
            ctx.expert.terminal_speed(spec),
        ) {
            Ok(traj) => {
                let waypoint = z.compose(&RobotState::new(w.x, w.y, w.theta));
                let execution = Execution::Lqr(self.weights.clone());
                Ok(Segment::from_plan(
                    z,
                    &traj.controls,
                    steps,
                    Some(waypoint),
                    &execution,
                    spec.dt,
                ))
            }
            Err(_) => Ok(Segment::hold(steps)),
        }
    }
}

/// Predictor with privileged access to the true map: returns the expert's
/// waypoint for the observed pose.
pub struct OraclePredictor {
    fields: Arc<CostFields>,
    expert: crate::expert::ExpertConfig,
    vehicle: VehicleSpec,
}

impl OraclePredictor {
    pub fn new(
        fields: Arc<CostFields>,
        expert: crate::expert::ExpertConfig,
        vehicle: VehicleSpec,
    ) -> Self {
        Self {
            fields,
            expert,
            vehicle,
        }
    }
}

impl WaypointPredictor for OraclePredictor {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn predict(&mut self, obs: &Observation, _goal_rel: Point2, u: &ControlInput) -> Waypoint {
        match plan_waypoint(&obs.pose, u, &self.fields, &self.expert, &self.vehicle) {
            Ok(plan) => plan.waypoint,
            // a zero-length waypoint fails the spline fit, so the agent holds
            Err(_) => Waypoint::new(0.0, 0.0, 0.0),
        }
    }
}

/// Always aims at a fixed ego-frame waypoint.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub Waypoint);

impl WaypointPredictor for ConstantPredictor {
    fn name(&self) -> String {
        "constant".into()
    }

    fn predict(&mut self, _: &Observation, _: Point2, _: &ControlInput) -> Waypoint {
        self.0
    }
}
