//! Occupancy grids, derived scalar fields and ray traversal.
//!
//! Cell `(i, j)` is column `i` (x) and row `j` (y); its center sits at
//! `origin + (i, j) * resolution` and it covers a square of side
//! `resolution` around that center. Anything outside the grid extent is
//! treated as occupied.

mod field;
mod io;
mod mapgen;
mod raycast;

pub use field::{fmm_distance, sample_field, signed_distance_field, FieldKind, ScalarField};
pub use io::{read_grid, write_grid, GRID_MAGIC};
pub use mapgen::{generate_map, MapSpec, ObstacleStyle};
pub use raycast::{raycast_depth, scan_bearings, RayWalk};

use crate::geom::Point2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),
    #[error("map generation left no free space")]
    NoFreeSpace,
    #[error("goal {x:.3},{y:.3} is outside the grid or on an occupied cell")]
    GoalNotFree { x: f64, y: f64 },
    #[error("grid file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Placement and size of a grid, shared by occupancy grids and fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub resolution: f64,
    /// World coordinates of the center of cell (0, 0).
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(
        resolution: f64,
        origin: Point2,
        width: usize,
        height: usize,
    ) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidGeometry(format!(
                "resolution must be > 0, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GridError::InvalidGeometry(format!(
                "empty grid {width}x{height}"
            )));
        }
        if !origin.is_finite() {
            return Err(GridError::InvalidGeometry("non-finite origin".into()));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + i as f64 * self.resolution,
            self.origin.y + j as f64 * self.resolution,
        )
    }

    /// Continuous cell coordinates: cell `i` spans `[i, i + 1)` on each axis.
    #[inline]
    pub fn continuous(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.resolution + 0.5,
            (p.y - self.origin.y) / self.resolution + 0.5,
        )
    }

    pub fn world_to_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let (cx, cy) = self.continuous(p);
        if !(cx >= 0.0 && cy >= 0.0) {
            return None;
        }
        let (i, j) = (cx.floor() as usize, cy.floor() as usize);
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.world_to_cell(p).is_some()
    }

    /// Length of the grid diagonal in meters.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64) * self.resolution
    }

    /// Lower-left and upper-right corners of the grid extent.
    pub fn bounds(&self) -> (Point2, Point2) {
        let h = 0.5 * self.resolution;
        (
            Point2::new(self.origin.x - h, self.origin.y - h),
            Point2::new(
                self.origin.x + (self.width as f64 - 0.5) * self.resolution,
                self.origin.y + (self.height as f64 - 0.5) * self.resolution,
            ),
        )
    }
}

/// Binary occupancy map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(
        resolution: f64,
        origin: Point2,
        width: usize,
        height: usize,
    ) -> Result<Self, GridError> {
        let geometry = GridGeometry::new(resolution, origin, width, height)?;
        Ok(Self {
            geometry,
            cells: vec![false; geometry.len()],
        })
    }

    /// Build from row-major occupancy (`cells[j * width + i]`).
    pub fn from_cells(geometry: GridGeometry, cells: Vec<bool>) -> Result<Self, GridError> {
        let geometry = GridGeometry::new(
            geometry.resolution,
            geometry.origin,
            geometry.width,
            geometry.height,
        )?;
        if cells.len() != geometry.len() {
            return Err(GridError::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        Ok(Self { geometry, cells })
    }

    /// Parse an ASCII picture, top row first, `#` occupied and anything else free.
    pub fn from_ascii(resolution: f64, origin: Point2, rows: &[&str]) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let geometry = GridGeometry::new(resolution, origin, width, height)?;
        let mut cells = vec![false; geometry.len()];
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(GridError::InvalidGeometry(format!("ragged row {r}")));
            }
            let j = height - 1 - r;
            for (i, c) in row.chars().enumerate() {
                cells[geometry.index(i, j)] = c == '#';
            }
        }
        Ok(Self { geometry, cells })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.geometry.origin
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.cells[self.geometry.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, occupied: bool) {
        let idx = self.geometry.index(i, j);
        self.cells[idx] = occupied;
    }

    /// Occupancy at a world point; out-of-extent points are occupied.
    pub fn is_occupied_at(&self, p: Point2) -> bool {
        match self.geometry.world_to_cell(p) {
            Some((i, j)) => self.is_occupied(i, j),
            None => true,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.cells.len() as f64
    }

    /// Mark every cell on the outer ring as occupied.
    pub fn close_border(&mut self) {
        let (w, h) = (self.width(), self.height());
        for i in 0..w {
            self.set(i, 0, true);
            self.set(i, h - 1, true);
        }
        for j in 0..h {
            self.set(0, j, true);
            self.set(w - 1, j, true);
        }
    }

    /// Occupy every cell whose center lies inside the axis-aligned box.
    pub fn fill_rect(&mut self, lo: Point2, hi: Point2) {
        let g = self.geometry;
        let range = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = ((lo - origin) / g.resolution).ceil().max(0.0);
            let b = ((hi - origin) / g.resolution).floor().min(n as f64 - 1.0);
            (a as usize, b)
        };
        let (i0, i1) = range(lo.x, hi.x, g.origin.x, g.width);
        let (j0, j1) = range(lo.y, hi.y, g.origin.y, g.height);
        if i1 < 0.0 || j1 < 0.0 {
            return;
        }
        for j in j0..=j1 as usize {
            for i in i0..=i1 as usize {
                self.set(i, j, true);
            }
        }
    }

    /// Grid with every cell within `radius` meters of an obstacle occupied.
    pub fn inflate(&self, radius: f64) -> OccupancyGrid {
        let sdf = signed_distance_field(self);
        let cells = sdf.values().iter().map(|&d| d <= radius).collect();
        OccupancyGrid {
            geometry: self.geometry,
            cells,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_to_cell_uses_cell_centers() {
        let g = GridGeometry::new(0.5, Point2::new(1.0, 2.0), 4, 3).unwrap();
        assert_eq!(g.world_to_cell(Point2::new(1.0, 2.0)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Point2::new(1.24, 2.24)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Point2::new(1.26, 2.0)), Some((1, 0)));
        assert_eq!(g.world_to_cell(Point2::new(0.74, 2.0)), None);
        assert_eq!(g.world_to_cell(Point2::new(2.74, 3.24)), Some((3, 2)));
        assert_eq!(g.world_to_cell(Point2::new(2.76, 3.0)), None);
    }

    #[test]
    fn out_of_extent_is_occupied() {
        let grid = OccupancyGrid::new(1.0, Point2::default(), 3, 3).unwrap();
        assert!(!grid.is_occupied_at(Point2::new(1.0, 1.0)));
        assert!(grid.is_occupied_at(Point2::new(-1.0, 1.0)));
        assert!(grid.is_occupied_at(Point2::new(1.0, 2.6)));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(OccupancyGrid::new(0.0, Point2::default(), 3, 3).is_err());
        assert!(OccupancyGrid::new(-1.0, Point2::default(), 3, 3).is_err());
        assert!(OccupancyGrid::new(1.0, Point2::default(), 0, 3).is_err());
    }

    #[test]
    fn ascii_top_row_is_highest_y() {
        let g = OccupancyGrid::from_ascii(1.0, Point2::default(), &["#..", "..."]).unwrap();
        assert!(g.is_occupied(0, 1));
        assert!(!g.is_occupied(0, 0));
    }
}
