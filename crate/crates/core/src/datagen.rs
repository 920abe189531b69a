//! Expert supervision datasets.
//!
//! One JSON Lines file per map holds one record per expert replan; the maps
//! are stored next to them and `manifest.json`, written last, carries the
//! resolved configuration needed to regenerate the dataset byte for byte.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::SensorConfig;
use crate::dynamics::{ControlInput, RobotState, VehicleSpec};
use crate::expert::{run_expert_episode, EpisodeError, EpisodeSpec, ExpertConfig, TrainingSample};
use crate::geom::Point2;
use crate::grid::{generate_map, write_grid, GridError, MapSpec, OccupancyGrid};
use crate::sim::{sample_episodes, Outcome, SamplingConstraints};
use crate::spline::Waypoint;

pub const FORMAT_VERSION: &str = "1";
/// Side of the square ego patch, in cells.
pub const PATCH_SIZE: usize = 64;
/// Patch cell holding the robot: bottom row, center column.
pub const PATCH_ROBOT_ROW: usize = PATCH_SIZE - 1;
pub const PATCH_ROBOT_COL: usize = PATCH_SIZE / 2;

/// Top-down ego-centric occupancy patch at world resolution. Row 0 is the
/// far edge; the robot sits at the bottom center facing up (towards row 0),
/// with its left towards column 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    bits: Vec<bool>,
}

impl Patch {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * PATCH_SIZE + col]
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row-major bitmap, eight cells per byte, most significant bit first.
    pub fn to_base64(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (k, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            bytes[k / 8] |= 0x80 >> (k % 8);
        }
        BASE64.encode(bytes)
    }

    pub fn from_base64(s: &str) -> Result<Self, String> {
        let bytes = BASE64.decode(s).map_err(|e| e.to_string())?;
        let n = PATCH_SIZE * PATCH_SIZE;
        if bytes.len() != n / 8 {
            return Err(format!("expected {} bytes, got {}", n / 8, bytes.len()));
        }
        Ok(Self {
            bits: (0..n)
                .map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0)
                .collect(),
        })
    }
}

/// Render the ego patch around `z`. Each cell samples the world at its
/// center; anything outside the world grid reads as occupied.
pub fn render_observation(grid: &OccupancyGrid, z: &RobotState) -> Patch {
    let res = grid.resolution();
    let mut bits = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for row in 0..PATCH_SIZE {
        for col in 0..PATCH_SIZE {
            let forward = (PATCH_ROBOT_ROW as f64 - row as f64) * res;
            let left = (PATCH_ROBOT_COL as f64 - col as f64) * res;
            bits.push(grid.is_occupied_at(z.from_ego(Point2::new(forward, left))));
        }
    }
    Patch { bits }
}

/// What a perception module would see at a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pose: RobotState,
    pub patch: Patch,
    pub ranges: Vec<f64>,
}

pub fn observe(grid: &OccupancyGrid, z: &RobotState, sensor: &SensorConfig) -> Observation {
    Observation {
        pose: *z,
        patch: render_observation(grid, z),
        ranges: sensor.scan(grid, z),
    }
}

/// An explicitly listed episode; `map` indexes [`DatasetConfig::maps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEpisode {
    pub map: usize,
    pub start: RobotState,
    pub goal: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub maps: Vec<MapSpec>,
    /// Sampled episodes per map; ignored when `episodes` is nonempty.
    pub episodes_per_map: usize,
    pub seed: u64,
    pub min_goal_distance: f64,
    pub min_forward_clearance: f64,
    pub episodes: Vec<FixedEpisode>,
    pub vehicle: VehicleSpec,
    pub expert: ExpertConfig,
    pub sensor: SensorConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            maps: vec![MapSpec::default()],
            episodes_per_map: 10,
            seed: 1,
            min_goal_distance: 2.0,
            min_forward_clearance: 1.0,
            episodes: Vec::new(),
            vehicle: VehicleSpec::default(),
            expert: ExpertConfig::default(),
            sensor: SensorConfig::default(),
        }
    }
}

impl DatasetConfig {
    /// Copy with every optional expert parameter made explicit.
    pub fn resolved(&self) -> Self {
        Self {
            expert: self.expert.resolved(&self.vehicle),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub grid_file: String,
    pub samples_file: String,
    pub spec: MapSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub episode: usize,
    pub map: usize,
    pub start: RobotState,
    pub goal: Point2,
    pub outcome: Outcome,
    pub replans: usize,
    pub samples: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: String,
    pub config: DatasetConfig,
    pub patch_size: usize,
    pub maps: Vec<MapEntry>,
    pub episodes: Vec<EpisodeEntry>,
    pub episode_count: usize,
    pub sample_count: usize,
    /// Episodes where the expert collided; should always be zero.
    pub collisions: usize,
}

/// One line of a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub episode: usize,
    pub step: usize,
    pub pose: RobotState,
    pub goal_rel: Point2,
    pub control: ControlInput,
    pub waypoint: Waypoint,
    pub control_seq: Vec<ControlInput>,
    pub planned_cost: f64,
    pub obs_patch: String,
    pub obs_ranges: Vec<f64>,
    /// Reserved for an externally rendered camera image.
    pub image_path: Option<String>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every float with 17 significant digits, which round-trips exactly.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn record_line(rec: &DatasetRecord) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    rec.serialize(&mut ser).expect("records serialize");
    String::from_utf8(buf).expect("json is utf-8")
}

fn to_record(
    episode: usize,
    s: &TrainingSample,
    grid: &OccupancyGrid,
    sensor: &SensorConfig,
) -> DatasetRecord {
    let obs = observe(grid, &s.pose, sensor);
    DatasetRecord {
        episode,
        step: s.step,
        pose: s.pose,
        goal_rel: s.goal_rel,
        control: s.control,
        waypoint: s.waypoint,
        control_seq: s.control_seq.clone(),
        planned_cost: s.planned_cost,
        obs_patch: obs.patch.to_base64(),
        obs_ranges: obs.ranges,
        image_path: None,
    }
}

pub fn grid_file_name(map: usize) -> String {
    format!("map_{:04}.grid", map + 1)
}

pub fn samples_file_name(map: usize) -> String {
    format!("samples_{:04}.jsonl", map + 1)
}

/// Run the expert over every episode and write the dataset into `out_dir`.
/// Runs on the current rayon pool; output does not depend on scheduling.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    let cfg = cfg.resolved();
    if cfg.maps.is_empty() {
        return Err(DatasetError::Config("at least one map is required".into()));
    }
    cfg.vehicle.validate().map_err(DatasetError::Config)?;
    cfg.expert
        .validate(&cfg.vehicle)
        .map_err(DatasetError::Config)?;
    cfg.sensor.validate().map_err(DatasetError::Config)?;

    let grids = cfg
        .maps
        .par_iter()
        .map(|spec| generate_map(spec).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;

    let mut episodes: Vec<(usize, RobotState, Point2)> = Vec::new();
    if cfg.episodes.is_empty() {
        for (m, grid) in grids.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(m as u64);
            let limits = SamplingConstraints {
                min_goal_distance: cfg.min_goal_distance,
                min_forward_clearance: cfg.min_forward_clearance,
            };
            let pairs =
                sample_episodes(grid, cfg.episodes_per_map, &mut rng, &cfg.expert, &limits)?;
            episodes.extend(pairs.into_iter().map(|(s, g)| (m, s, g)));
        }
    } else {
        for e in &cfg.episodes {
            if e.map >= grids.len() {
                return Err(DatasetError::Config(format!(
                    "episode refers to map {} of {}",
                    e.map,
                    grids.len()
                )));
            }
            episodes.push((e.map, e.start, e.goal));
        }
    }

    let runs = episodes
        .par_iter()
        .enumerate()
        .map(|(id, &(m, start, goal))| {
            let ep = EpisodeSpec {
                grid: grids[m].clone(),
                start,
                goal,
                vehicle: cfg.vehicle,
                expert: cfg.expert.clone(),
            };
            let run = run_expert_episode(&ep)?;
            let keep = matches!(run.result.outcome, Outcome::Success | Outcome::Collision);
            let records: Vec<DatasetRecord> = if keep {
                run.samples
                    .iter()
                    .map(|s| to_record(id, s, &grids[m], &cfg.sensor))
                    .collect()
            } else {
                Vec::new()
            };
            let entry = EpisodeEntry {
                episode: id,
                map: m,
                start,
                goal,
                outcome: run.result.outcome,
                replans: run.result.replans(),
                samples: records.len(),
                failure: run.result.failure.clone(),
            };
            Ok((entry, records))
        })
        .collect::<Result<Vec<_>, EpisodeError>>()?;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut maps = Vec::with_capacity(grids.len());
    for (m, grid) in grids.iter().enumerate() {
        let grid_path = out_dir.join(grid_file_name(m));
        let file = fs::File::create(&grid_path).map_err(io_err(&grid_path))?;
        let mut w = BufWriter::new(file);
        write_grid(grid, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(&grid_path))?;

        let samples_path = out_dir.join(samples_file_name(m));
        let file = fs::File::create(&samples_path).map_err(io_err(&samples_path))?;
        let mut w = BufWriter::new(file);
        for (_, records) in runs.iter().filter(|(e, _)| e.map == m) {
            for rec in records {
                writeln!(w, "{}", record_line(rec)).map_err(io_err(&samples_path))?;
            }
        }
        w.flush().map_err(io_err(&samples_path))?;
        maps.push(MapEntry {
            grid_file: grid_file_name(m),
            samples_file: samples_file_name(m),
            spec: cfg.maps[m].clone(),
        });
    }

    let entries: Vec<EpisodeEntry> = runs.into_iter().map(|(e, _)| e).collect();
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION.into(),
        patch_size: PATCH_SIZE,
        maps,
        episode_count: entries.len(),
        sample_count: entries.iter().map(|e| e.samples).sum(),
        collisions: entries
            .iter()
            .filter(|e| e.outcome == Outcome::Collision)
            .count(),
        episodes: entries,
        config: cfg,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DatasetError::Parse {
            path: path.to_path_buf(),
            msg: format!("unsupported format_version {:?}", manifest.format_version),
        });
    }
    Ok(manifest)
}

/// Rebuild a dataset from its manifest into `out_dir`.
pub fn regenerate(manifest_path: &Path, out_dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let manifest = read_manifest(manifest_path)?;
    generate_dataset(&manifest.config, out_dir)
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: {e}", n + 1),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn patch_bits_round_trip() {
        let bits = (0..PATCH_SIZE * PATCH_SIZE)
            .map(|k| k % 3 == 0 || k % 7 == 1)
            .collect();
        let p = Patch { bits };
        assert_eq!(Patch::from_base64(&p.to_base64()).unwrap(), p);
        assert!(Patch::from_base64("AAAA").is_err());
    }

    #[test]
    fn msb_first_packing() {
        let mut bits = vec![false; PATCH_SIZE * PATCH_SIZE];
        bits[0] = true;
        bits[9] = true;
        let bytes = BASE64.decode(Patch { bits }.to_base64()).unwrap();
        assert_eq!(&bytes[..2], &[0x80, 0x40]);
    }

    #[test]
    fn wall_ahead_lands_on_expected_row() {
        let mut g = OccupancyGrid::new(0.05, Point2::default(), 200, 200).unwrap();
        for j in 0..200 {
            g.set(120, j, true);
        }
        // robot 1 m behind the wall column at x = 6.0
        let p = render_observation(&g, &RobotState::new(5.0, 5.0, 0.0));
        let row = PATCH_ROBOT_ROW - 20;
        assert!((0..PATCH_SIZE).all(|c| p.get(row, c)));
        assert_eq!(p.occupied_count(), PATCH_SIZE);
    }

    #[test]
    fn empty_world_patch_is_free_inside_extent() {
        let g = OccupancyGrid::new(0.05, Point2::default(), 400, 400).unwrap();
        let p = render_observation(&g, &RobotState::new(10.0, 10.0, 0.7));
        assert_eq!(p.occupied_count(), 0);
        // near the corner, facing out, most of the patch is outside
        let p = render_observation(&g, &RobotState::new(0.5, 0.5, -3.0 * FRAC_PI_2 / 1.5));
        assert!(p.occupied_count() > PATCH_SIZE * PATCH_SIZE / 2);
    }
}
