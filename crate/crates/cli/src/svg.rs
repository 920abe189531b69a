//! Top-view SVG of an executed episode.

use std::fmt::Write;

use navkit::geom::Point2;
use navkit::sim::ExecutedTrajectory;
use navkit::OccupancyGrid;

const PX_PER_M: f64 = 60.0;

struct View {
    x0: f64,
    y1: f64,
}

impl View {
    fn x(&self, x: f64) -> f64 {
        (x - self.x0) * PX_PER_M
    }

    // SVG y grows downward
    fn y(&self, y: f64) -> f64 {
        (self.y1 - y) * PX_PER_M
    }
}

pub fn render(
    grid: &OccupancyGrid,
    traj: &ExecutedTrajectory,
    goal: Point2,
    goal_radius: f64,
) -> String {
    let (lo, hi) = grid.geometry().bounds();
    let view = View { x0: lo.x, y1: hi.y };
    let (w, h) = ((hi.x - lo.x) * PX_PER_M, (hi.y - lo.y) * PX_PER_M);
    let res = grid.resolution();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    // one rectangle per horizontal run of occupied cells
    s.push_str(r##"<g fill="#404040">"##);
    s.push('\n');
    for j in 0..grid.height() {
        let mut i = 0;
        while i < grid.width() {
            if !grid.is_occupied(i, j) {
                i += 1;
                continue;
            }
            let start = i;
            while i < grid.width() && grid.is_occupied(i, j) {
                i += 1;
            }
            let c = grid.geometry().cell_center(start, j);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                view.x(c.x - 0.5 * res),
                view.y(c.y + 0.5 * res),
                (i - start) as f64 * res * PX_PER_M,
                res * PX_PER_M
            );
        }
    }
    s.push_str("</g>\n");

    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2e9e44" fill-opacity="0.35" stroke="#2e9e44"/>"##,
        view.x(goal.x),
        view.y(goal.y),
        goal_radius * PX_PER_M
    );

    if !traj.states.is_empty() {
        let points: Vec<String> = traj
            .states
            .iter()
            .map(|z| format!("{:.2},{:.2}", view.x(z.x), view.y(z.y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f5fbf" stroke-width="2"/>"##,
            points.join(" ")
        );
        let z = traj.states[0];
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="6" fill="#1f5fbf"/>"##,
            view.x(z.x),
            view.y(z.y)
        );
    }

    let arm = 0.12;
    s.push_str(r##"<g stroke="#d2691e" stroke-width="2">"##);
    s.push('\n');
    for w in &traj.waypoints {
        let (sn, cs) = w.phi.sin_cos();
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><circle cx="{:.2}" cy="{:.2}" r="3" fill="none"/>"#,
            view.x(w.x),
            view.y(w.y),
            view.x(w.x + arm * cs),
            view.y(w.y + arm * sn),
            view.x(w.x),
            view.y(w.y)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
