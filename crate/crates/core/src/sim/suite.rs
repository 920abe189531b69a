//! Benchmark suites: episode sampling, multi-agent runs and the report.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    run_episode_with_fields, Agent, DisturbanceModel, Execution, ExpertAgent, Metrics, Outcome,
};
use crate::baselines::{MappingAgent, SensorConfig};
use crate::dynamics::{RobotState, VehicleSpec};
use crate::expert::{default_planner, CostFields, EpisodeSpec, ExpertConfig};
use crate::geom::Point2;
use crate::grid::{
    fmm_distance, generate_map, raycast_depth, signed_distance_field, GridError, MapSpec,
    OccupancyGrid,
};
use crate::tracking::LqrWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Minimum collision-free start-to-goal distance, m.
    pub min_goal_distance: f64,
    /// Free straight-line range required ahead of the start pose, m.
    pub min_forward_clearance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            seed: 1,
            min_goal_distance: 2.0,
            min_forward_clearance: 1.0,
        }
    }
}

/// Constraints on sampled start/goal pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConstraints {
    pub min_goal_distance: f64,
    pub min_forward_clearance: f64,
}

impl SuiteConfig {
    pub fn constraints(&self) -> SamplingConstraints {
        SamplingConstraints {
            min_goal_distance: self.min_goal_distance,
            min_forward_clearance: self.min_forward_clearance,
        }
    }
}

const HEADING_DRAWS: usize = 64;

/// Sample `count` start/goal pairs certified solvable: both ends clear of
/// obstacles by more than `lambda1`, the start reachable from the goal on
/// the grid inflated by `lambda1`, and the start heading facing at least
/// `min_forward_clearance` of free space (a vehicle at rest cannot turn on
/// the spot).
pub fn sample_episodes(
    grid: &OccupancyGrid,
    count: usize,
    rng: &mut ChaCha8Rng,
    cfg: &ExpertConfig,
    limits: &SamplingConstraints,
) -> Result<Vec<(RobotState, Point2)>, GridError> {
    let inflated = grid.inflate(cfg.lambda1);
    let sdf = signed_distance_field(grid);
    let geometry = *grid.geometry();
    let free: Vec<usize> = (0..geometry.len())
        .filter(|&idx| {
            let (i, j) = geometry.coords(idx);
            !inflated.cells()[idx] && sdf.sample(geometry.cell_center(i, j)) > cfg.lambda1
        })
        .collect();
    if free.is_empty() {
        return Err(GridError::NoFreeSpace);
    }
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0;
    while pairs.len() < count {
        attempts += 1;
        if attempts > 100 * count + 100 {
            return Err(GridError::InvalidSpec(format!(
                "could not sample {count} solvable episodes with min goal distance {}",
                limits.min_goal_distance
            )));
        }
        let (gi, gj) = geometry.coords(free[rng.gen_range(0..free.len())]);
        let goal = geometry.cell_center(gi, gj);
        let fmm = fmm_distance(&inflated, goal)?;
        let starts: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&idx| {
                let d = fmm.values()[idx];
                d.is_finite() && d >= limits.min_goal_distance
            })
            .collect();
        if starts.is_empty() {
            continue;
        }
        let (si, sj) = geometry.coords(starts[rng.gen_range(0..starts.len())]);
        let p = geometry.cell_center(si, sj);
        for _ in 0..HEADING_DRAWS {
            let z = RobotState::new(
                p.x,
                p.y,
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let ahead = raycast_depth(grid, &z, 0.0, 1, limits.min_forward_clearance)[0];
            if ahead >= limits.min_forward_clearance {
                pairs.push((z, goal));
                break;
            }
        }
    }
    Ok(pairs)
}

/// Build `suite.episodes` episodes spread round-robin over the maps.
pub fn build_suite(
    maps: &[MapSpec],
    suite: &SuiteConfig,
    vehicle: &VehicleSpec,
    expert: &ExpertConfig,
) -> Result<Vec<EpisodeSpec>, GridError> {
    if maps.is_empty() {
        return Err(GridError::InvalidSpec(
            "suite needs at least one map".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let mut out = Vec::with_capacity(suite.episodes);
    let per_map: Vec<usize> = (0..maps.len())
        .map(|m| suite.episodes / maps.len() + usize::from(m < suite.episodes % maps.len()))
        .collect();
    let mut pending = Vec::new();
    for (spec, &n) in maps.iter().zip(&per_map) {
        let grid = Arc::new(generate_map(spec)?);
        let pairs = sample_episodes(&grid, n, &mut rng, expert, &suite.constraints())?;
        pending.push((grid, pairs));
    }
    for k in 0..per_map.iter().copied().max().unwrap_or(0) {
        for (grid, pairs) in &pending {
            if let Some(&(start, goal)) = pairs.get(k) {
                out.push(EpisodeSpec {
                    grid: grid.clone(),
                    start,
                    goal,
                    vehicle: *vehicle,
                    expert: expert.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Agents a benchmark can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Expert on the true map, plans replayed open loop.
    Expert,
    /// Expert on the true map, plans tracked with LQR.
    ExpertLqr,
    MappingMemoryless,
    MappingMemory,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Expert,
        AgentKind::ExpertLqr,
        AgentKind::MappingMemoryless,
        AgentKind::MappingMemory,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Expert => "expert",
            AgentKind::ExpertLqr => "expert-lqr",
            AgentKind::MappingMemoryless => "mapping-memoryless",
            AgentKind::MappingMemory => "mapping-memory",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown agent {s:?}; expected one of expert, expert-lqr, mapping-memoryless, mapping-memory"))
    }
}

/// Shared agent parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentSettings {
    pub lqr: LqrWeights,
    pub sensor: SensorConfig,
    /// How mapping agents execute their plans.
    pub mapping_execution: Execution,
}

pub fn make_agent(kind: &AgentKind, settings: &AgentSettings) -> Box<dyn Agent> {
    match kind {
        AgentKind::Expert => Box::new(ExpertAgent::new(default_planner(), Execution::OpenLoop)),
        AgentKind::ExpertLqr => Box::new(ExpertAgent::new(
            default_planner(),
            Execution::Lqr(settings.lqr.clone()),
        )),
        AgentKind::MappingMemoryless => Box::new(MappingAgent::new(
            false,
            settings.sensor,
            default_planner(),
            settings.mapping_execution.clone(),
        )),
        AgentKind::MappingMemory => Box::new(MappingAgent::new(
            true,
            settings.sensor,
            default_planner(),
            settings.mapping_execution.clone(),
        )),
    }
}

/// One episode as seen by one agent.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeSummary {
    pub agent: String,
    pub episode: usize,
    pub outcome: Outcome,
    pub time_to_goal: Option<f64>,
    pub metrics: Option<Metrics>,
    pub failure: Option<String>,
}

/// Aggregate row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRow {
    pub agent: String,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub failures: usize,
    pub success_pct: f64,
    /// Over this agent's successful episodes.
    pub time: Option<(f64, f64)>,
    /// Over episodes every agent in the report succeeded at.
    pub accel: Option<(f64, f64)>,
    pub jerk: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<AgentRow>,
    pub episodes: Vec<EpisodeSummary>,
    /// Number of episodes all agents succeeded at.
    pub common_successes: usize,
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

impl BenchmarkReport {
    /// Aggregate per-episode summaries. `summaries` must hold one entry per
    /// (agent, episode) pair.
    pub fn from_summaries(
        agents: &[String],
        n_episodes: usize,
        mut summaries: Vec<EpisodeSummary>,
    ) -> Self {
        summaries.sort_by(|a, b| {
            let ia = agents.iter().position(|n| *n == a.agent);
            let ib = agents.iter().position(|n| *n == b.agent);
            ia.cmp(&ib).then(a.episode.cmp(&b.episode))
        });
        let common: Vec<usize> = (0..n_episodes)
            .filter(|&e| {
                agents.iter().all(|a| {
                    summaries
                        .iter()
                        .any(|s| s.agent == *a && s.episode == e && s.outcome == Outcome::Success)
                })
            })
            .collect();
        let rows = agents
            .iter()
            .map(|name| {
                let mine: Vec<&EpisodeSummary> =
                    summaries.iter().filter(|s| s.agent == *name).collect();
                let count = |o: Outcome| mine.iter().filter(|s| s.outcome == o).count();
                let successes = count(Outcome::Success);
                let times: Vec<f64> = mine.iter().filter_map(|s| s.time_to_goal).collect();
                let on_common: Vec<&Metrics> = mine
                    .iter()
                    .filter(|s| common.contains(&s.episode))
                    .filter_map(|s| s.metrics.as_ref())
                    .collect();
                let accel: Vec<f64> = on_common.iter().map(|m| m.avg_accel).collect();
                let jerk: Vec<f64> = on_common.iter().map(|m| m.avg_jerk).collect();
                AgentRow {
                    agent: name.clone(),
                    episodes: mine.len(),
                    successes,
                    collisions: count(Outcome::Collision),
                    timeouts: count(Outcome::Timeout),
                    failures: count(Outcome::Failure),
                    success_pct: if mine.is_empty() {
                        0.0
                    } else {
                        100.0 * successes as f64 / mine.len() as f64
                    },
                    time: mean_std(&times),
                    accel: mean_std(&accel),
                    jerk: mean_std(&jerk),
                }
            })
            .collect();
        Self {
            rows,
            episodes: summaries,
            common_successes: common.len(),
        }
    }

    pub fn row(&self, agent: &str) -> Option<&AgentRow> {
        self.rows.iter().find(|r| r.agent == agent)
    }

    /// One row per agent; missing aggregates are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "agent,success_pct,time_mean,time_std,accel_mean,accel_std,jerk_mean,jerk_std\n",
        );
        let pair = |p: Option<(f64, f64)>| match p {
            Some((m, s)) => format!("{m:.6},{s:.6}"),
            None => "NA,NA".to_string(),
        };
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.2},{},{},{}",
                r.agent,
                r.success_pct,
                pair(r.time),
                pair(r.accel),
                pair(r.jerk)
            );
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let pm = |p: Option<(f64, f64)>, prec: usize| match p {
            Some((m, s)) => format!("{m:.prec$} ± {s:.prec$}"),
            None => "N/A".to_string(),
        };
        let header = [
            "Agent",
            "Success (%)",
            "Time taken (s)",
            "Acceleration (m/s^2)",
            "Jerk (m/s^3)",
        ];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.agent.clone(),
                    format!("{:.2}", r.success_pct),
                    pm(r.time, 2),
                    pm(r.accel, 2),
                    pm(r.jerk, 2),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in row.iter().zip(widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w - c.chars().count();
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&header.map(String::from));
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
        }
        let _ = writeln!(
            out,
            "\n{} episodes; acceleration and jerk over the {} episodes every agent solved.",
            self.rows.first().map_or(0, |r| r.episodes),
            self.common_successes
        );
        out
    }
}

/// Run every agent on every episode. Episodes run in parallel on the
/// current rayon pool; results do not depend on scheduling.
pub fn run_suite(
    specs: &[EpisodeSpec],
    agents: &[AgentKind],
    settings: &AgentSettings,
    disturbance: &DisturbanceModel,
) -> BenchmarkReport {
    let fields: Vec<Result<CostFields, String>> = specs
        .par_iter()
        .map(|ep| {
            ep.fields().map_err(|e| e.to_string()).and_then(|f| {
                ep.validate(&f).map_err(|e| e.to_string())?;
                Ok(f)
            })
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..agents.len())
        .flat_map(|a| (0..specs.len()).map(move |e| (a, e)))
        .collect();
    let summaries: Vec<EpisodeSummary> = jobs
        .par_iter()
        .map(|&(a, e)| {
            let mut agent = make_agent(&agents[a], settings);
            let name = agent.name();
            match &fields[e] {
                Ok(f) => {
                    let r = run_episode_with_fields(
                        agent.as_mut(),
                        &specs[e],
                        f,
                        &disturbance.for_episode(e as u64),
                    );
                    EpisodeSummary {
                        agent: name,
                        episode: e,
                        outcome: r.outcome,
                        time_to_goal: r.time_to_goal,
                        metrics: r.metrics,
                        failure: r.failure,
                    }
                }
                Err(msg) => EpisodeSummary {
                    agent: name,
                    episode: e,
                    outcome: Outcome::Failure,
                    time_to_goal: None,
                    metrics: None,
                    failure: Some(msg.clone()),
                },
            }
        })
        .collect();
    let names: Vec<String> = agents.iter().map(|a| a.name().to_string()).collect();
    BenchmarkReport::from_summaries(&names, specs.len(), summaries)
}
