//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the code under test for the
//! quantity being checked.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use navkit::baselines::{Belief, BeliefGrid, MappingAgent, SensorConfig};
use navkit::dynamics::{step, ControlInput, RobotState, VehicleSpec};
use navkit::expert::{default_planner, CostFields, EpisodeSpec, ExpertConfig};
use navkit::geom::Point2;
use navkit::grid::{GridGeometry, MapSpec, OccupancyGrid};
use navkit::sim::{run_episode, DisturbanceModel, EpisodeResult, Execution};
use navkit::spline::{fit_spline, PlannedTrajectory, Waypoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random occupancy grid with roughly `fill` occupied cells.
pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, fill: f64) -> OccupancyGrid {
    let geometry = GridGeometry::new(0.05, Point2::new(-1.0, 0.5), w, h).unwrap();
    let cells = (0..w * h).map(|_| rng.gen_bool(fill)).collect();
    OccupancyGrid::from_cells(geometry, cells).unwrap()
}

/// O(n²) signed distance between cell centers.
pub fn brute_force_sdf(grid: &OccupancyGrid) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let res = grid.resolution();
    let cap = (w as f64).hypot(h as f64) * res;
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let occ = grid.is_occupied(i, j);
            let mut best = u64::MAX;
            for jj in 0..h {
                for ii in 0..w {
                    if grid.is_occupied(ii, jj) != occ {
                        let di = i.abs_diff(ii) as u64;
                        let dj = j.abs_diff(jj) as u64;
                        best = best.min(di * di + dj * dj);
                    }
                }
            }
            let d = if best == u64::MAX {
                cap
            } else {
                (best as f64).sqrt() * res
            };
            out.push(if occ { -d } else { d });
        }
    }
    out
}

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected Dijkstra from the goal cell, in meters. Diagonal moves need
/// both adjacent orthogonal cells free, so no corner is cut.
pub fn dijkstra8(grid: &OccupancyGrid, goal: (usize, usize)) -> Vec<f64> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let res = grid.resolution();
    let free = |i: i64, j: i64| {
        i >= 0 && j >= 0 && i < w && j < h && !grid.is_occupied(i as usize, j as usize)
    };
    let mut dist = vec![f64::INFINITY; (w * h) as usize];
    let start = (goal.1 as i64 * w + goal.0 as i64) as usize;
    dist[start] = 0.0;
    let mut heap = BinaryHeap::from([Node(0.0, start)]);
    while let Some(Node(d, idx)) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let (i, j) = (idx as i64 % w, idx as i64 / w);
        for di in -1..=1 {
            for dj in -1..=1 {
                if (di, dj) == (0, 0) || !free(i + di, j + dj) {
                    continue;
                }
                if di != 0 && dj != 0 && !(free(i + di, j) && free(i, j + dj)) {
                    continue;
                }
                let step = if di != 0 && dj != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let n = ((j + dj) * w + i + di) as usize;
                let nd = d + step * res;
                if nd < dist[n] {
                    dist[n] = nd;
                    heap.push(Node(nd, n));
                }
            }
        }
    }
    dist
}

/// Central finite-difference Jacobians of one Euler step.
pub fn finite_difference_jacobians(
    z: &RobotState,
    u: &ControlInput,
    dt: f64,
    h: f64,
) -> ([[f64; 3]; 3], [[f64; 2]; 3]) {
    let f = |x: [f64; 3], u: [f64; 2]| {
        // raw state, no wrapping, so differences stay smooth
        let s = step(
            &RobotState {
                x: x[0],
                y: x[1],
                phi: x[2],
            },
            &ControlInput::new(u[0], u[1]),
            dt,
        );
        let dphi = navkit::dynamics::wrap_angle(s.phi - x[2]);
        [s.x, s.y, x[2] + dphi]
    };
    let x0 = [z.x, z.y, z.phi];
    let u0 = [u.v, u.omega];
    let mut a = [[0.0; 3]; 3];
    let mut b = [[0.0; 2]; 3];
    for c in 0..3 {
        let (mut xp, mut xm) = (x0, x0);
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (f(xp, u0), f(xm, u0));
        for r in 0..3 {
            a[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    for c in 0..2 {
        let (mut up, mut um) = (u0, u0);
        up[c] += h;
        um[c] -= h;
        let (fp, fm) = (f(x0, up), f(x0, um));
        for r in 0..3 {
            b[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    (a, b)
}

/// Stage cost written out from its definition.
pub fn reference_stage_cost(d_obs: f64, d_goal: f64, lambda1: f64, lambda2: f64) -> f64 {
    if !d_goal.is_finite() {
        return f64::INFINITY;
    }
    let margin = (lambda1 - d_obs).max(0.0);
    margin * margin * margin + lambda2 * d_goal * d_goal
}

/// Candidate lattice rebuilt from its description: radius-major, then
/// bearing, then heading, each evenly spaced over its range.
pub fn reference_lattice(cfg: &ExpertConfig, spec: &VehicleSpec) -> Vec<Waypoint> {
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect()
        }
    };
    let r_max = cfg.r_max(spec);
    let radii = if cfg.n_r == 1 {
        vec![cfg.r_min]
    } else {
        lin(cfg.r_min, r_max, cfg.n_r)
    };
    let mut out = Vec::new();
    for r in radii {
        for b in lin(-cfg.fov / 2.0, cfg.fov / 2.0, cfg.n_bearing) {
            for th in lin(b - cfg.heading_window, b + cfg.heading_window, cfg.n_theta) {
                out.push(Waypoint::new(r * b.cos(), r * b.sin(), th));
            }
        }
    }
    out
}

/// Exhaustive planner: score every candidate serially and keep the first
/// strict minimum. Costs are summed here from sampled fields, independently
/// of the library's trajectory cost.
pub fn exhaustive_plan(
    z: &RobotState,
    u: &ControlInput,
    fields: &CostFields,
    cfg: &ExpertConfig,
    spec: &VehicleSpec,
) -> Option<(usize, f64, PlannedTrajectory)> {
    let mut best: Option<(usize, f64, PlannedTrajectory)> = None;
    for (idx, w) in reference_lattice(cfg, spec).iter().enumerate() {
        let Ok(traj) = fit_spline(w, u, cfg.planning_horizon, spec, cfg.terminal_speed(spec))
        else {
            continue;
        };
        let cost = reference_cost(&traj, z, fields, cfg);
        if !cost.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((idx, cost, traj));
        }
    }
    best
}

pub fn reference_cost(
    traj: &PlannedTrajectory,
    z: &RobotState,
    fields: &CostFields,
    cfg: &ExpertConfig,
) -> f64 {
    traj.states
        .iter()
        .map(|s| {
            let (c, sn) = (z.phi.cos(), z.phi.sin());
            let p = Point2::new(z.x + c * s.x - sn * s.y, z.y + sn * s.x + c * s.y);
            reference_stage_cost(
                fields.sdf.sample(p),
                fields.fmm.sample(p),
                cfg.lambda1,
                cfg.lambda2,
            )
        })
        .sum()
}

/// Open grid `w × h` meters with a closed border.
pub fn open_room(w: f64, h: f64) -> Arc<OccupancyGrid> {
    let res = 0.05;
    let mut g = OccupancyGrid::new(
        res,
        Point2::default(),
        (w / res).round() as usize,
        (h / res).round() as usize,
    )
    .unwrap();
    g.close_border();
    Arc::new(g)
}

pub fn episode(grid: Arc<OccupancyGrid>, start: RobotState, goal: Point2) -> EpisodeSpec {
    EpisodeSpec {
        grid,
        start,
        goal,
        vehicle: VehicleSpec::default(),
        expert: ExpertConfig::default(),
    }
}

/// L-shaped corridor of the given width: east along the bottom, then north.
pub fn l_corridor(width: f64) -> EpisodeSpec {
    let mut g = OccupancyGrid::new(0.05, Point2::default(), 200, 200).unwrap();
    for j in 0..200 {
        for i in 0..200 {
            let p = g.geometry().cell_center(i, j);
            let horizontal = p.x > 0.5 && p.x < 8.0 && p.y > 1.0 && p.y < 1.0 + width;
            let vertical = p.x > 8.0 - width && p.x < 8.0 && p.y > 1.0 && p.y < 8.0;
            g.set(i, j, !(horizontal || vertical));
        }
    }
    episode(
        Arc::new(g),
        RobotState::new(1.2, 1.0 + width / 2.0, 0.0),
        Point2::new(8.0 - width / 2.0, 7.3),
    )
}

/// Cluttered map on which the memoryless mapping agent, with a 60° sensor,
/// turns into an obstacle it scanned earlier but no longer sees.
pub fn forgotten_obstacle_fixture() -> (EpisodeSpec, SensorConfig) {
    let spec = MapSpec {
        seed: 101,
        density: 0.2,
        min_size: 0.3,
        max_size: 0.8,
        ..Default::default()
    };
    let grid = Arc::new(navkit::grid::generate_map(&spec).unwrap());
    let ep = episode(
        grid,
        RobotState::new(6.55, 0.6, 0.1603781245234508),
        Point2::new(4.75, 0.35),
    );
    (
        ep,
        SensorConfig {
            fov: 60f64.to_radians(),
            ..Default::default()
        },
    )
}

/// Run a mapping agent and report whether its collision (if any) hit a cell
/// that an earlier scan had marked occupied but that was missing from the
/// belief the final segment was planned on.
pub fn run_mapping_with_attribution(
    ep: &EpisodeSpec,
    sensor: SensorConfig,
    memory: bool,
) -> (EpisodeResult, bool) {
    let mut agent = MappingAgent::new(memory, sensor, default_planner(), Execution::OpenLoop);
    let result = run_episode(&mut agent, ep, &DisturbanceModel::None).unwrap();
    let traj = &result.trajectory;
    let grid = &ep.grid;
    let mut seen = BeliefGrid::unknown(*grid.geometry());
    for &k in &traj.replan_steps {
        let z = traj.states[k];
        seen.fuse_scan(&z, &sensor.scan(grid, &z), &sensor);
    }
    let last = *traj.states.last().unwrap();
    let attributable = match (
        grid.geometry().world_to_cell(last.position()),
        agent.last_planning_grid(),
    ) {
        (Some((ci, cj)), Some(plan)) if result.outcome == navkit::sim::Outcome::Collision => {
            let lo = |c: usize| c.saturating_sub(1);
            (lo(ci)..=(ci + 1).min(grid.width() - 1)).any(|i| {
                (lo(cj)..=(cj + 1).min(grid.height() - 1)).any(|j| {
                    grid.is_occupied(i, j)
                        && seen.get(i, j) == Belief::Occupied
                        && !plan.is_occupied(i, j)
                })
            })
        }
        _ => false,
    };
    (result, attributable)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of re-deriving every record of a dataset from scratch.
#[derive(Debug, Default)]
pub struct DatasetCheck {
    pub records: usize,
    pub max_cost_error: f64,
    pub control_seq_mismatches: usize,
    pub worst: Option<String>,
}

/// Re-fit each stored waypoint from its stored control, re-cost it on the
/// stored map, and compare with the stored cost and control prefix.
pub fn verify_dataset(dir: &std::path::Path) -> DatasetCheck {
    use navkit::datagen::{read_manifest, read_records};

    let manifest = read_manifest(&dir.join("manifest.json")).unwrap();
    let cfg = &manifest.config;
    let spec = cfg.vehicle;
    let steps = spec.steps(cfg.expert.control_horizon);
    let mut check = DatasetCheck::default();
    for (m, entry) in manifest.maps.iter().enumerate() {
        let file = std::fs::File::open(dir.join(&entry.grid_file)).unwrap();
        let grid = navkit::grid::read_grid(std::io::BufReader::new(file)).unwrap();
        let records = read_records(&dir.join(&entry.samples_file)).unwrap();
        let mut fields: std::collections::HashMap<usize, CostFields> = Default::default();
        for rec in records {
            let ep = &manifest.episodes[rec.episode];
            assert_eq!(ep.map, m);
            let f = fields
                .entry(rec.episode)
                .or_insert_with(|| CostFields::build(&grid, ep.goal).unwrap());
            let traj = fit_spline(
                &rec.waypoint,
                &rec.control,
                cfg.expert.planning_horizon,
                &spec,
                cfg.expert.terminal_speed(&spec),
            )
            .expect("stored waypoint is feasible");
            let cost = reference_cost(&traj, &rec.pose, f, &cfg.expert);
            let err = (cost - rec.planned_cost).abs();
            if err > check.max_cost_error {
                check.max_cost_error = err;
                check.worst = Some(format!("episode {} step {}", rec.episode, rec.step));
            }
            if rec.control_seq != traj.controls[..steps] {
                check.control_seq_mismatches += 1;
            }
            check.records += 1;
        }
    }
    check
}

/// Byte-level comparison of two dataset directories.
pub fn same_files(a: &std::path::Path, b: &std::path::Path) -> bool {
    let list = |d: &std::path::Path| {
        let mut names: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        names
    };
    let names = list(a);
    names == list(b)
        && names
            .iter()
            .all(|n| std::fs::read(a.join(n)).unwrap() == std::fs::read(b.join(n)).unwrap())
}

/// Planning states spread over random cluttered maps: pose at least
/// `lambda1` from obstacles with the goal reachable, plus a random control.
pub fn random_planning_states(
    count: usize,
    seed: u64,
) -> Vec<(Arc<CostFields>, RobotState, ControlInput)> {
    let spec = VehicleSpec::default();
    let cfg = ExpertConfig::default();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut m = 0;
    while out.len() < count {
        let grid = navkit::grid::generate_map(&MapSpec {
            seed: 500 + m,
            density: 0.15,
            ..Default::default()
        })
        .unwrap();
        m += 1;
        let inflated = grid.inflate(cfg.lambda1);
        let goal = loop {
            let p = Point2::new(r.gen_range(0.5..9.5), r.gen_range(0.5..9.5));
            if !inflated.is_occupied_at(p) {
                break p;
            }
        };
        let (lo, hi) = grid.geometry().bounds();
        let fields = Arc::new(CostFields::build(&grid, goal).unwrap());
        let mut placed = 0;
        while placed < 10 && out.len() < count {
            let p = Point2::new(r.gen_range(lo.x..hi.x), r.gen_range(lo.y..hi.y));
            if fields.obstacle_distance(p) > cfg.lambda1 && fields.goal_distance(p).is_finite() {
                let z = RobotState::new(
                    p.x,
                    p.y,
                    r.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                );
                let u = ControlInput::new(
                    r.gen_range(0.0..=spec.v_max),
                    r.gen_range(-spec.omega_max..=spec.omega_max),
                );
                out.push((fields.clone(), z, u));
                placed += 1;
            }
        }
    }
    out
}
