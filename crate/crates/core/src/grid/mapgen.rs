use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridError, OccupancyGrid};
use crate::geom::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstacleStyle {
    /// Axis-aligned boxes scattered over an open floor.
    RandomBoxes,
    /// A lattice of rooms joined by doorways, with boxes inside the rooms.
    RoomsAndCorridors,
}

/// Recipe for a synthetic map. The same spec always yields the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSpec {
    pub seed: u64,
    /// Map extent in meters.
    pub width: f64,
    pub height: f64,
    pub style: ObstacleStyle,
    /// Target fraction of interior cells covered by boxes.
    pub density: f64,
    /// Box side length range in meters.
    pub min_size: f64,
    pub max_size: f64,
    /// Meters per cell.
    pub resolution: f64,
    /// Room pitch for `rooms-and-corridors`.
    pub room_size: f64,
    pub wall_thickness: f64,
    pub door_width: f64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 10.0,
            height: 10.0,
            style: ObstacleStyle::RandomBoxes,
            density: 0.1,
            min_size: 0.3,
            max_size: 1.2,
            resolution: 0.05,
            room_size: 3.3,
            wall_thickness: 0.15,
            door_width: 1.0,
        }
    }
}

impl MapSpec {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: String| Err(GridError::InvalidSpec(msg));
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return bad(format!("resolution must be > 0, got {}", self.resolution));
        }
        if !(self.width >= 3.0 * self.resolution && self.height >= 3.0 * self.resolution) {
            return bad("width and height must span at least 3 cells".into());
        }
        if !(0.0..1.0).contains(&self.density) {
            return bad(format!("density must lie in [0, 1), got {}", self.density));
        }
        if !(self.min_size > 0.0 && self.min_size <= self.max_size) {
            return bad(format!(
                "need 0 < min_size <= max_size, got {}..{}",
                self.min_size, self.max_size
            ));
        }
        if self.style == ObstacleStyle::RoomsAndCorridors
            && !(self.wall_thickness > 0.0
                && self.door_width > 0.0
                && self.room_size > self.door_width + 2.0 * self.wall_thickness)
        {
            return bad("room_size must exceed door_width + 2 * wall_thickness".into());
        }
        Ok(())
    }

    fn cells(&self, extent: f64) -> usize {
        (extent / self.resolution).round() as usize
    }
}

/// Build the grid described by `spec`. Border cells are always occupied.
pub fn generate_map(spec: &MapSpec) -> Result<OccupancyGrid, GridError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.cells(spec.width), spec.cells(spec.height));
    let mut grid = OccupancyGrid::new(spec.resolution, Point2::default(), w, h)?;
    grid.close_border();

    let (lo, hi) = grid.geometry().bounds();
    if spec.style == ObstacleStyle::RoomsAndCorridors {
        place_rooms(&mut grid, spec, &mut rng, lo, hi);
    }
    place_boxes(&mut grid, spec, &mut rng, lo, hi);

    if grid.occupied_count() == grid.cells().len() {
        return Err(GridError::NoFreeSpace);
    }
    Ok(grid)
}

fn place_rooms(
    grid: &mut OccupancyGrid,
    spec: &MapSpec,
    rng: &mut ChaCha8Rng,
    lo: Point2,
    hi: Point2,
) {
    let t = spec.wall_thickness;
    let nx = ((hi.x - lo.x) / spec.room_size).round().max(1.0) as usize;
    let ny = ((hi.y - lo.y) / spec.room_size).round().max(1.0) as usize;
    let pitch_x = (hi.x - lo.x) / nx as f64;
    let pitch_y = (hi.y - lo.y) / ny as f64;

    // Interior walls at x = lo.x + k * pitch_x, each span between rows gets a door.
    for k in 1..nx {
        let x = lo.x + k as f64 * pitch_x;
        for r in 0..ny {
            let (y0, y1) = (lo.y + r as f64 * pitch_y, lo.y + (r + 1) as f64 * pitch_y);
            let door = rng.gen_range(y0 + t..=y1 - t - spec.door_width);
            grid.fill_rect(Point2::new(x - 0.5 * t, y0), Point2::new(x + 0.5 * t, door));
            grid.fill_rect(
                Point2::new(x - 0.5 * t, door + spec.door_width),
                Point2::new(x + 0.5 * t, y1),
            );
        }
    }
    for k in 1..ny {
        let y = lo.y + k as f64 * pitch_y;
        for c in 0..nx {
            let (x0, x1) = (lo.x + c as f64 * pitch_x, lo.x + (c + 1) as f64 * pitch_x);
            let door = rng.gen_range(x0 + t..=x1 - t - spec.door_width);
            grid.fill_rect(Point2::new(x0, y - 0.5 * t), Point2::new(door, y + 0.5 * t));
            grid.fill_rect(
                Point2::new(door + spec.door_width, y - 0.5 * t),
                Point2::new(x1, y + 0.5 * t),
            );
        }
    }
}

fn place_boxes(
    grid: &mut OccupancyGrid,
    spec: &MapSpec,
    rng: &mut ChaCha8Rng,
    lo: Point2,
    hi: Point2,
) {
    if spec.density <= 0.0 {
        return;
    }
    let interior = ((grid.width() - 2) * (grid.height() - 2)).max(1) as f64;
    let base = grid.occupied_count();
    let mut boxes = 0usize;
    while ((grid.occupied_count() - base) as f64) < spec.density * interior && boxes < 10_000 {
        let sx = rng
            .gen_range(spec.min_size..=spec.max_size)
            .min(hi.x - lo.x);
        let sy = rng
            .gen_range(spec.min_size..=spec.max_size)
            .min(hi.y - lo.y);
        let x = rng.gen_range(lo.x..=hi.x - sx);
        let y = rng.gen_range(lo.y..=hi.y - sy);
        grid.fill_rect(Point2::new(x, y), Point2::new(x + sx, y + sy));
        boxes += 1;
    }
}
