use super::{GridGeometry, OccupancyGrid};
use crate::dynamics::RobotState;
use crate::geom::Point2;

/// Amanatides–Woo traversal of the cells a ray passes through.
///
/// Yields `(cell, t_enter)` with `t_enter` in meters, starting with the cell
/// containing the ray origin at `t = 0`. Cells outside the grid are yielded
/// as `None` once, after which the walk ends. The walk also ends before the
/// first cell entered at or beyond `max_range`.
pub struct RayWalk {
    width: i64,
    height: i64,
    resolution: f64,
    max_range: f64,
    ix: i64,
    iy: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
    started: bool,
    done: bool,
}

impl RayWalk {
    pub fn new(geometry: &GridGeometry, from: Point2, heading: f64, max_range: f64) -> Self {
        let (cx, cy) = geometry.continuous(from);
        let (dx, dy) = (heading.cos(), heading.sin());
        let (ix, iy) = (cx.floor() as i64, cy.floor() as i64);
        let axis = |c: f64, i: i64, d: f64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((i + 1) as f64 - c) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (i as f64 - c) / d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, t_max_x, t_delta_x) = axis(cx, ix, dx);
        let (step_y, t_max_y, t_delta_y) = axis(cy, iy, dy);
        Self {
            width: geometry.width as i64,
            height: geometry.height as i64,
            resolution: geometry.resolution,
            max_range,
            ix,
            iy,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
            started: false,
            done: false,
        }
    }

    fn current(&mut self) -> (Option<(usize, usize)>, f64) {
        let inside = self.ix >= 0 && self.iy >= 0 && self.ix < self.width && self.iy < self.height;
        if !inside {
            self.done = true;
            return (None, self.t * self.resolution);
        }
        (
            Some((self.ix as usize, self.iy as usize)),
            self.t * self.resolution,
        )
    }
}

impl Iterator for RayWalk {
    type Item = (Option<(usize, usize)>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current());
        }
        if self.t_max_x <= self.t_max_y {
            self.t = self.t_max_x;
            self.ix += self.step_x;
            self.t_max_x += self.t_delta_x;
        } else {
            self.t = self.t_max_y;
            self.iy += self.step_y;
            self.t_max_y += self.t_delta_y;
        }
        if !self.t.is_finite() || self.t * self.resolution >= self.max_range {
            self.done = true;
            return None;
        }
        Some(self.current())
    }
}

/// Bearings of a planar scan, evenly spaced over `[phi - fov/2, phi + fov/2]`.
pub fn scan_bearings(phi: f64, fov: f64, n_rays: usize) -> impl Iterator<Item = f64> {
    let span = if n_rays > 1 {
        fov / (n_rays - 1) as f64
    } else {
        0.0
    };
    let first = if n_rays > 1 { phi - 0.5 * fov } else { phi };
    (0..n_rays).map(move |k| first + k as f64 * span)
}

/// Planar range scan: distance to the first occupied cell along each ray,
/// clamped to `max_range`. Leaving the grid counts as a hit.
pub fn raycast_depth(
    grid: &OccupancyGrid,
    state: &RobotState,
    fov: f64,
    n_rays: usize,
    max_range: f64,
) -> Vec<f64> {
    let from = state.position();
    scan_bearings(state.phi, fov, n_rays)
        .map(|bearing| {
            RayWalk::new(grid.geometry(), from, bearing, max_range)
                .find(|&(cell, _)| cell.is_none_or(|(i, j)| grid.is_occupied(i, j)))
                .map_or(max_range, |(_, t)| t.min(max_range))
        })
        .collect()
}
