//! `NAVGRID1` text format.
//!
//! ```text
//! NAVGRID1 <resolution> <origin_x> <origin_y> <width> <height>
//! <height rows of width characters, '#' occupied, '.' free>
//! ```
//!
//! Rows are written from the highest `y` row down so the file reads like a
//! top view. Floats are written in shortest round-trip form.

use std::io::{BufRead, Write};

use super::{GridError, GridGeometry, OccupancyGrid};
use crate::geom::Point2;

pub const GRID_MAGIC: &str = "NAVGRID1";

pub fn write_grid<W: Write>(grid: &OccupancyGrid, mut out: W) -> std::io::Result<()> {
    let g = grid.geometry();
    writeln!(
        out,
        "{GRID_MAGIC} {} {} {} {} {}",
        g.resolution, g.origin.x, g.origin.y, g.width, g.height
    )?;
    let mut line = String::with_capacity(g.width + 1);
    for j in (0..g.height).rev() {
        line.clear();
        for i in 0..g.width {
            line.push(if grid.is_occupied(i, j) { '#' } else { '.' });
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_grid<R: BufRead>(input: R) -> Result<OccupancyGrid, GridError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(GridError::Parse {
        line: 1,
        msg: "empty file".into(),
    })??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != GRID_MAGIC {
        return Err(GridError::Parse {
            line: 1,
            msg: format!("expected '{GRID_MAGIC} res ox oy width height'"),
        });
    }
    let float = |s: &str, what: &str| {
        s.parse::<f64>().map_err(|_| GridError::Parse {
            line: 1,
            msg: format!("bad {what} '{s}'"),
        })
    };
    let int = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| GridError::Parse {
            line: 1,
            msg: format!("bad {what} '{s}'"),
        })
    };
    let resolution = float(fields[1], "resolution")?;
    let origin = Point2::new(float(fields[2], "origin x")?, float(fields[3], "origin y")?);
    let width = int(fields[4], "width")?;
    let height = int(fields[5], "height")?;
    let geometry = GridGeometry::new(resolution, origin, width, height)?;

    let mut cells = vec![false; geometry.len()];
    for r in 0..height {
        let lineno = r + 2;
        let row = lines.next().ok_or(GridError::Parse {
            line: lineno,
            msg: "missing row".into(),
        })??;
        let row = row.trim_end_matches('\r');
        if row.len() != width {
            return Err(GridError::Parse {
                line: lineno,
                msg: format!("row has {} cells, expected {width}", row.len()),
            });
        }
        let j = height - 1 - r;
        for (i, c) in row.bytes().enumerate() {
            cells[geometry.index(i, j)] = match c {
                b'#' => true,
                b'.' => false,
                other => {
                    return Err(GridError::Parse {
                        line: lineno,
                        msg: format!("unexpected character {:?}", other as char),
                    })
                }
            };
        }
    }
    OccupancyGrid::from_cells(geometry, cells)
}
