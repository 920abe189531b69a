//! Python bindings: map generation, distance fields, single plans and episodes.

use std::io::{BufReader, BufWriter};
use std::sync::Arc;

use navkit::config::RunConfig;
use navkit::expert::{plan_waypoint as plan, EpisodeSpec};
use navkit::grid::{
    fmm_distance, generate_map as generate, read_grid, signed_distance_field, write_grid,
    ObstacleStyle,
};
use navkit::sim::{make_agent, run_episode as run, AgentKind};
use navkit::{ControlInput, CostFields, MapSpec, OccupancyGrid, Point2, RobotState, ScalarField};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load_config(text: Option<&str>) -> PyResult<RunConfig> {
    let cfg = match text {
        Some(t) => RunConfig::from_toml(t).map_err(value_err)?,
        None => RunConfig::default(),
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg.resolved())
}

/// Rows indexed `[j][i]`, i.e. `y` then `x`.
fn rows(field: &ScalarField) -> Vec<Vec<f64>> {
    let w = field.geometry().width;
    field.values().chunks(w).map(<[f64]>::to_vec).collect()
}

/// Occupancy grid; cell `(i, j)` is centered at `origin + (i, j) * resolution`.
#[pyclass(name = "Grid", frozen)]
struct PyGrid(Arc<OccupancyGrid>);

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let grid = read_grid(BufReader::new(file))
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Ok(Self(Arc::new(grid)))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file =
            std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        write_grid(&self.0, BufWriter::new(file))
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.0.resolution()
    }

    #[getter]
    fn origin(&self) -> (f64, f64) {
        let o = self.0.origin();
        (o.x, o.y)
    }

    fn occupied_fraction(&self) -> f64 {
        self.0.occupied_fraction()
    }

    fn is_occupied(&self, x: f64, y: f64) -> bool {
        self.0.is_occupied_at(Point2::new(x, y))
    }

    /// Occupancy as `[j][i]` rows.
    fn occupancy(&self) -> Vec<Vec<bool>> {
        self.0
            .cells()
            .chunks(self.0.width())
            .map(<[bool]>::to_vec)
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({}x{} @ {} m, {:.1}% occupied)",
            self.0.width(),
            self.0.height(),
            self.0.resolution(),
            100.0 * self.0.occupied_fraction()
        )
    }
}

/// Deterministic synthetic map.
#[pyfunction]
#[pyo3(signature = (seed=0, density=0.1, style="random-boxes", width=10.0, height=10.0))]
fn generate_map(
    py: Python<'_>,
    seed: u64,
    density: f64,
    style: &str,
    width: f64,
    height: f64,
) -> PyResult<PyGrid> {
    let style = match style {
        "random-boxes" => ObstacleStyle::RandomBoxes,
        "rooms-and-corridors" => ObstacleStyle::RoomsAndCorridors,
        other => return Err(value_err(format!("unknown style {other:?}"))),
    };
    let spec = MapSpec {
        seed,
        density,
        style,
        width,
        height,
        ..MapSpec::default()
    };
    let grid = py.detach(|| generate(&spec)).map_err(value_err)?;
    Ok(PyGrid(Arc::new(grid)))
}

/// Signed obstacle distance at every cell center, meters.
#[pyfunction]
fn signed_distance(py: Python<'_>, grid: &PyGrid) -> Vec<Vec<f64>> {
    let g = grid.0.clone();
    rows(&py.detach(|| signed_distance_field(&g)))
}

/// Collision-free distance to `goal` at every cell center; `inf` where unreachable.
#[pyfunction]
fn goal_distance(py: Python<'_>, grid: &PyGrid, goal: (f64, f64)) -> PyResult<Vec<Vec<f64>>> {
    let g = grid.0.clone();
    let field = py
        .detach(|| fmm_distance(&g, Point2::new(goal.0, goal.1)))
        .map_err(value_err)?;
    Ok(rows(&field))
}

/// Best waypoint from `pose` moving at `control`, or `None` if nothing is feasible.
#[pyfunction]
#[pyo3(signature = (grid, pose, goal, control=(0.0, 0.0), config=None))]
fn plan_waypoint<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    pose: (f64, f64, f64),
    goal: (f64, f64),
    control: (f64, f64),
    config: Option<&str>,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    let cfg = load_config(config)?;
    let g = grid.0.clone();
    let z = RobotState::new(pose.0, pose.1, pose.2);
    let u = ControlInput::new(control.0, control.1);
    let result = py.detach(|| {
        let fields = CostFields::build(&g, Point2::new(goal.0, goal.1))?;
        Ok::<_, navkit::grid::GridError>(plan(&z, &u, &fields, &cfg.expert, &cfg.vehicle).ok())
    });
    let Some(p) = result.map_err(value_err)? else {
        return Ok(None);
    };
    let out = PyDict::new(py);
    out.set_item("waypoint", (p.waypoint.x, p.waypoint.y, p.waypoint.theta))?;
    out.set_item("cost", p.cost)?;
    out.set_item("candidate", p.candidate)?;
    out.set_item(
        "controls",
        p.trajectory
            .controls
            .iter()
            .map(|c| (c.v, c.omega))
            .collect::<Vec<_>>(),
    )?;
    let world: Vec<_> = p
        .trajectory
        .world_states(&z)
        .iter()
        .map(|s| (s.x, s.y, s.phi))
        .collect();
    out.set_item("states", world)?;
    Ok(Some(out))
}

/// Run one episode with the named agent and return its outcome and trace.
#[pyfunction]
#[pyo3(signature = (grid, start, goal, agent="expert", config=None))]
fn run_episode<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    start: (f64, f64, f64),
    goal: (f64, f64),
    agent: &str,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load_config(config)?;
    let kind: AgentKind = agent.parse().map_err(value_err)?;
    let ep = EpisodeSpec {
        grid: grid.0.clone(),
        start: RobotState::new(start.0, start.1, start.2),
        goal: Point2::new(goal.0, goal.1),
        vehicle: cfg.vehicle,
        expert: cfg.expert.clone(),
    };
    let result = py
        .detach(|| {
            let mut a = make_agent(&kind, &cfg.agent_settings());
            run(a.as_mut(), &ep, &cfg.disturbance)
        })
        .map_err(value_err)?;
    let t = &result.trajectory;
    let out = PyDict::new(py);
    out.set_item("outcome", result.outcome.as_str())?;
    out.set_item("time_to_goal", result.time_to_goal)?;
    out.set_item("elapsed", result.elapsed)?;
    out.set_item("path_length", t.path_length())?;
    out.set_item("replans", result.replans())?;
    out.set_item("failure", result.failure.clone())?;
    out.set_item(
        "states",
        t.states
            .iter()
            .map(|s| (s.x, s.y, s.phi))
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "controls",
        t.controls
            .iter()
            .map(|c| (c.v, c.omega))
            .collect::<Vec<_>>(),
    )?;
    out.set_item("d_obs", t.d_obs.clone())?;
    if let Some(m) = &result.metrics {
        let metrics = PyDict::new(py);
        metrics.set_item("avg_accel", m.avg_accel)?;
        metrics.set_item("avg_jerk", m.avg_jerk)?;
        metrics.set_item("path_length", m.path_length)?;
        metrics.set_item("min_obstacle_distance", m.min_obstacle_distance)?;
        out.set_item("metrics", metrics)?;
    }
    Ok(out)
}

/// Resolved default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().resolved().to_toml()
}

#[pymodule]
pub fn navkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(generate_map, m)?)?;
    m.add_function(wrap_pyfunction!(signed_distance, m)?)?;
    m.add_function(wrap_pyfunction!(goal_distance, m)?)?;
    m.add_function(wrap_pyfunction!(plan_waypoint, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
