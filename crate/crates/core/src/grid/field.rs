use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GridError, GridGeometry, OccupancyGrid};
use crate::geom::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Signed distance to obstacles: positive in free space, `<= 0` inside.
    ObstacleDistance,
    /// Collision-free distance to a goal; `+inf` where unreachable.
    GoalDistance,
}

/// A real value per cell, in meters, on the geometry of its source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    geometry: GridGeometry,
    kind: FieldKind,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(geometry: GridGeometry, kind: FieldKind, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), geometry.len(), "field size mismatch");
        Self {
            geometry,
            kind,
            values,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.geometry.index(i, j)]
    }

    /// Bilinear sample at a world point, see [`sample_field`].
    pub fn sample(&self, p: Point2) -> f64 {
        sample_field(self, p)
    }
}

/// Squared Euclidean distance transform along one line
/// (Felzenszwalb & Huttenlocher lower envelope of parabolas).
/// `f` holds squared distances, `f64::INFINITY` where no site exists.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared distance (in cells²) from every cell center to the nearest
/// cell center where `site` is true.
fn squared_edt(geometry: &GridGeometry, site: impl Fn(usize) -> bool) -> Vec<f64> {
    let (w, h) = (geometry.width, geometry.height);
    let mut grid: Vec<f64> = (0..w * h)
        .map(|idx| if site(idx) { 0.0 } else { f64::INFINITY })
        .collect();
    let mut v = Vec::new();
    let mut z = Vec::new();

    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for i in 0..w {
        for j in 0..h {
            col[j] = grid[j * w + i];
        }
        edt_1d(&col, &mut col_out, &mut v, &mut z);
        for j in 0..h {
            grid[j * w + i] = col_out[j];
        }
    }
    let mut row_out = vec![0.0; w];
    for j in 0..h {
        edt_1d(&grid[j * w..(j + 1) * w], &mut row_out, &mut v, &mut z);
        grid[j * w..(j + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Signed Euclidean distance between cell centers.
///
/// Free cells hold the distance to the nearest occupied cell center, occupied
/// cells the negated distance to the nearest free cell center. A grid with no
/// occupied cells is capped at the grid diagonal (and an all-occupied grid at
/// minus the diagonal).
pub fn signed_distance_field(grid: &OccupancyGrid) -> ScalarField {
    let geometry = *grid.geometry();
    let cells = grid.cells();
    let to_occupied = squared_edt(&geometry, |idx| cells[idx]);
    let to_free = squared_edt(&geometry, |idx| !cells[idx]);
    let cap = geometry.diagonal();
    let res = geometry.resolution;
    let values = cells
        .iter()
        .enumerate()
        .map(|(idx, &occ)| {
            if occ {
                let d2 = to_free[idx];
                if d2.is_finite() {
                    -(d2.sqrt() * res)
                } else {
                    -cap
                }
            } else {
                let d2 = to_occupied[idx];
                if d2.is_finite() {
                    d2.sqrt() * res
                } else {
                    cap
                }
            }
        })
        .collect();
    ScalarField {
        geometry,
        kind: FieldKind::ObstacleDistance,
        values,
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    value: f64,
    idx: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on value, ties on index for determinism
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// First-order fast marching solution of `|grad d| = 1` from the goal cell,
/// on the 4-neighbor stencil with occupied cells excluded.
///
/// Values are meters; unreachable and occupied cells are `+inf`.
pub fn fmm_distance(grid: &OccupancyGrid, goal: Point2) -> Result<ScalarField, GridError> {
    let geometry = *grid.geometry();
    let (gi, gj) = geometry
        .world_to_cell(goal)
        .filter(|&(i, j)| !grid.is_occupied(i, j))
        .ok_or(GridError::GoalNotFree {
            x: goal.x,
            y: goal.y,
        })?;

    let (w, h) = (geometry.width, geometry.height);
    let cells = grid.cells();
    let mut value = vec![f64::INFINITY; w * h];
    let mut known = vec![false; w * h];
    let mut heap = BinaryHeap::new();

    let start = geometry.index(gi, gj);
    value[start] = 0.0;
    heap.push(Trial {
        value: 0.0,
        idx: start,
    });

    let known_value = |value: &[f64], known: &[bool], idx: usize| {
        if known[idx] {
            value[idx]
        } else {
            f64::INFINITY
        }
    };

    while let Some(Trial { value: v, idx }) = heap.pop() {
        if known[idx] || v > value[idx] {
            continue;
        }
        known[idx] = true;
        let (i, j) = (idx % w, idx / w);
        let mut neighbors = [None; 4];
        if i > 0 {
            neighbors[0] = Some(idx - 1);
        }
        if i + 1 < w {
            neighbors[1] = Some(idx + 1);
        }
        if j > 0 {
            neighbors[2] = Some(idx - w);
        }
        if j + 1 < h {
            neighbors[3] = Some(idx + w);
        }
        for n in neighbors.into_iter().flatten() {
            if known[n] || cells[n] {
                continue;
            }
            let (ni, nj) = (n % w, n / w);
            let a = f64::min(
                if ni > 0 {
                    known_value(&value, &known, n - 1)
                } else {
                    f64::INFINITY
                },
                if ni + 1 < w {
                    known_value(&value, &known, n + 1)
                } else {
                    f64::INFINITY
                },
            );
            let b = f64::min(
                if nj > 0 {
                    known_value(&value, &known, n - w)
                } else {
                    f64::INFINITY
                },
                if nj + 1 < h {
                    known_value(&value, &known, n + w)
                } else {
                    f64::INFINITY
                },
            );
            let t = solve_eikonal(a, b);
            if t < value[n] {
                value[n] = t;
                heap.push(Trial { value: t, idx: n });
            }
        }
    }

    let res = geometry.resolution;
    let values = value
        .into_iter()
        .enumerate()
        .map(|(idx, v)| if cells[idx] { f64::INFINITY } else { v * res })
        .collect();
    Ok(ScalarField {
        geometry,
        kind: FieldKind::GoalDistance,
        values,
    })
}

/// Upwind quadratic update with unit spacing and unit speed.
#[inline]
fn solve_eikonal(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= 1.0 || !hi.is_finite() {
        lo + 1.0
    } else {
        0.5 * (lo + hi + (2.0 - (hi - lo) * (hi - lo)).sqrt())
    }
}

/// Bilinear interpolation between the four surrounding cell-center values.
///
/// Within the outer half cell of the extent the nearest center row/column is
/// extended. If a corner with nonzero weight holds `+inf`, the result is
/// `+inf`. Points outside the extent read as `0` (in collision) for obstacle
/// distance and `+inf` for goal distance.
pub fn sample_field(field: &ScalarField, p: Point2) -> f64 {
    let g = &field.geometry;
    if !g.contains(p) {
        return match field.kind {
            FieldKind::ObstacleDistance => 0.0,
            FieldKind::GoalDistance => f64::INFINITY,
        };
    }
    let fx = ((p.x - g.origin.x) / g.resolution).clamp(0.0, (g.width - 1) as f64);
    let fy = ((p.y - g.origin.y) / g.resolution).clamp(0.0, (g.height - 1) as f64);
    let (i0, tx) = split_axis(fx, g.width);
    let (j0, ty) = split_axis(fy, g.height);
    let i1 = (i0 + 1).min(g.width - 1);
    let j1 = (j0 + 1).min(g.height - 1);

    let corners = [
        ((1.0 - tx) * (1.0 - ty), field.get(i0, j0)),
        (tx * (1.0 - ty), field.get(i1, j0)),
        ((1.0 - tx) * ty, field.get(i0, j1)),
        (tx * ty, field.get(i1, j1)),
    ];
    let mut acc = 0.0;
    for (weight, value) in corners {
        if weight == 0.0 {
            continue;
        }
        if value == f64::INFINITY {
            return f64::INFINITY;
        }
        acc += weight * value;
    }
    acc
}

#[inline]
fn split_axis(f: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let i0 = (f.floor() as usize).min(n - 2);
    (i0, f - i0 as f64)
}
