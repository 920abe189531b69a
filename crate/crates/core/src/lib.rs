//! Waypoint-based navigation on 2D occupancy grids.
//!
//! The crate covers the model-based half of a learned-waypoint navigation
//! stack: occupancy grids with signed-distance and fast-marching goal fields,
//! a discretized Dubins vehicle, cubic spline trajectories to ego-frame
//! waypoints, a sampling MPC expert that picks waypoints against an
//! obstacle/goal cost, time-varying LQR tracking, geometric mapping
//! baselines, a closed-loop simulator with benchmark metrics, and a
//! supervision-dataset generator.

pub mod baselines;
pub mod config;
pub mod datagen;
pub mod dynamics;
pub mod expert;
pub mod geom;
pub mod grid;
pub mod sim;
pub mod spline;
pub mod tracking;

pub use dynamics::{ControlInput, RobotState, VehicleSpec};
pub use expert::{CostFields, ExpertConfig, Plan};
pub use geom::Point2;
pub use grid::{FieldKind, MapSpec, OccupancyGrid, ScalarField};
pub use spline::{PlannedTrajectory, Waypoint};
