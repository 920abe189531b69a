//! `navkit`: map generation, single runs, benchmarks and dataset generation.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use navkit::config::RunConfig;
use navkit::datagen::{generate_dataset, grid_file_name};
use navkit::dynamics::RobotState;
use navkit::expert::EpisodeSpec;
use navkit::geom::Point2;
use navkit::grid::{generate_map, read_grid, write_grid};
use navkit::sim::{
    build_suite, make_agent, run_episode, run_suite, sample_episodes, AgentKind, Outcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exit codes; a stable contract for scripts.
const EXIT_CONFIG: u8 = 1;
const EXIT_EPISODE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "navkit",
    version,
    about = "Waypoint-based navigation on occupancy grids"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 usage or config error, 2 collision or episode failure, \
3 I/O error, 4 episode timeout."
)]
struct Cli {
    /// TOML configuration file; every key has a default.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config value, e.g. `--set expert.lambda1=0.25`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads (0 = all cores). Overrides `jobs` in the config.
    #[arg(short, long, global = true)]
    jobs: Option<usize>,

    /// Print the effective configuration with every default filled in, then exit.
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured maps as NAVGRID1 files (map_0001.grid, ...).
    GenMaps {
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
        /// Generate this many maps from the first map spec, with consecutive seeds.
        #[arg(long)]
        count: Option<usize>,
        /// First seed when `--count` is given; defaults to the first spec's seed.
        #[arg(long, requires = "count")]
        seed: Option<u64>,
    },
    /// Run one episode and export its trajectory as CSV and SVG.
    Run {
        /// NAVGRID1 map file; otherwise the map is generated from the config.
        #[arg(long, value_name = "FILE", conflicts_with = "map_index")]
        grid: Option<PathBuf>,
        /// Which configured map to generate.
        #[arg(long, default_value_t = 0)]
        map_index: usize,
        /// Start pose `x,y,phi` in meters and radians; sampled when omitted.
        #[arg(long, value_name = "X,Y,PHI", allow_hyphen_values = true)]
        start: Option<String>,
        /// Goal position `x,y`; sampled when omitted.
        #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
        goal: Option<String>,
        /// expert, expert-lqr, mapping-memoryless or mapping-memory; defaults to the first configured agent.
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(short, long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Run every configured agent over the configured suite.
    Bench {
        #[arg(short, long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Generate an expert-supervised dataset.
    Datagen {
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
        /// Write into a nonempty directory.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

fn config_err(msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        msg: msg.to_string(),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        msg: format!("{}: {e}", path.display()),
    }
}

/// Apply a dotted `section.key=value` override to a TOML table. Values are
/// parsed as TOML, falling back to a bare string.
fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("--set expects KEY=VALUE, got {spec:?}")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for part in sections {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("--set {key}: {part} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| io_err(path, e))?,
        None => String::new(),
    };
    let mut doc: toml::Table =
        toml::from_str(&text).map_err(|e| config_err(format!("config: {e}")))?;
    for o in &cli.overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg =
        RunConfig::from_toml(&toml::to_string(&doc).expect("table serializes")).map_err(|e| {
            let origin = cli
                .config
                .as_ref()
                .map_or("config".to_string(), |p| p.display().to_string());
            config_err(format!("{origin}: {e}"))
        })?;
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn parse_numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(config_err(format!(
            "--{what} expects {n} comma-separated numbers, got {s:?}"
        ))),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn cmd_gen_maps(
    cfg: &RunConfig,
    out: &Path,
    count: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let specs = match count {
        Some(n) => {
            let template = cfg.maps.first().cloned().unwrap_or_default();
            let first = seed.unwrap_or(template.seed);
            (0..n as u64)
                .map(|k| navkit::MapSpec {
                    seed: first + k,
                    ..template.clone()
                })
                .collect()
        }
        None => cfg.maps.clone(),
    };
    if specs.is_empty() {
        return Err(config_err("no maps configured"));
    }
    ensure_dir(out)?;
    for (k, spec) in specs.iter().enumerate() {
        let grid = generate_map(spec).map_err(|e| config_err(format!("maps[{k}]: {e}")))?;
        let path = out.join(grid_file_name(k));
        let mut buf = Vec::new();
        write_grid(&grid, &mut buf).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
        println!(
            "{}  {:.2}% occupied",
            path.display(),
            100.0 * grid.occupied_fraction()
        );
    }
    Ok(())
}

struct RunArgs {
    grid: Option<PathBuf>,
    map_index: usize,
    start: Option<String>,
    goal: Option<String>,
    agent: Option<AgentKind>,
    out: PathBuf,
}

fn trajectory_csv(result: &navkit::sim::EpisodeResult) -> String {
    let t = &result.trajectory;
    let mut s = String::from("t,x,y,phi,v,omega,d_obs,d_goal\n");
    for (k, z) in t.states.iter().enumerate() {
        // the control applied from this state; none after the last one
        let (v, w) = match t.controls.get(k) {
            Some(u) => (format!("{:.6}", u.v), format!("{:.6}", u.omega)),
            None => ("NA".into(), "NA".into()),
        };
        let _ = writeln!(
            s,
            "{:.2},{:.6},{:.6},{:.6},{v},{w},{:.6},{:.6}",
            k as f64 * t.dt,
            z.x,
            z.y,
            z.phi,
            t.d_obs[k],
            t.d_goal[k]
        );
    }
    s
}

fn cmd_run(cfg: &RunConfig, args: RunArgs) -> Result<u8, Failure> {
    let grid = match &args.grid {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
            read_grid(std::io::BufReader::new(file)).map_err(|e| io_err(path, e))?
        }
        None => {
            let spec = cfg.maps.get(args.map_index).ok_or_else(|| {
                config_err(format!(
                    "--map-index {} but {} maps configured",
                    args.map_index,
                    cfg.maps.len()
                ))
            })?;
            generate_map(spec).map_err(|e| config_err(format!("maps[{}]: {e}", args.map_index)))?
        }
    };
    let (start, goal) = match (&args.start, &args.goal) {
        (Some(s), Some(g)) => {
            let s = parse_numbers(s, 3, "start")?;
            let g = parse_numbers(g, 2, "goal")?;
            (RobotState::new(s[0], s[1], s[2]), Point2::new(g[0], g[1]))
        }
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.suite.seed);
            let pairs = sample_episodes(&grid, 1, &mut rng, &cfg.expert, &cfg.suite.constraints())
                .map_err(|e| config_err(format!("cannot sample an episode: {e}")))?;
            pairs[0]
        }
        _ => return Err(config_err("give both --start and --goal, or neither")),
    };
    let kind = match args.agent.or_else(|| cfg.agents.first().copied()) {
        Some(k) => k,
        None => return Err(config_err("no agent selected")),
    };
    let ep = EpisodeSpec {
        grid: std::sync::Arc::new(grid),
        start,
        goal,
        vehicle: cfg.vehicle,
        expert: cfg.expert.clone(),
    };
    let mut agent = make_agent(&kind, &cfg.agent_settings());
    let result = run_episode(agent.as_mut(), &ep, &cfg.disturbance).map_err(config_err)?;

    ensure_dir(&args.out)?;
    write_file(&args.out.join("trajectory.csv"), &trajectory_csv(&result))?;
    write_file(
        &args.out.join("trajectory.svg"),
        &svg::render(
            &ep.grid,
            &result.trajectory,
            goal,
            cfg.expert.success_radius,
        ),
    )?;

    let t = &result.trajectory;
    println!(
        "{}: {} after {:.2} s, {} replans, path {:.2} m, start ({:.3}, {:.3}, {:.3}), goal ({:.3}, {:.3})",
        kind.name(),
        result.outcome.as_str(),
        result.elapsed,
        result.replans(),
        t.path_length(),
        start.x,
        start.y,
        start.phi,
        goal.x,
        goal.y
    );
    if let Some(why) = &result.failure {
        eprintln!("failure: {why}");
    }
    Ok(match result.outcome {
        Outcome::Success => 0,
        Outcome::Collision | Outcome::Failure => EXIT_EPISODE,
        Outcome::Timeout => EXIT_TIMEOUT,
    })
}

fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    if cfg.agents.is_empty() {
        return Err(config_err(
            "agents: at least one agent is required for bench",
        ));
    }
    let specs =
        build_suite(&cfg.maps, &cfg.suite, &cfg.vehicle, &cfg.expert).map_err(config_err)?;
    let report = run_suite(&specs, &cfg.agents, &cfg.agent_settings(), &cfg.disturbance);
    ensure_dir(out)?;
    write_file(&out.join("bench.csv"), &report.to_csv())?;
    let text = report.to_text();
    write_file(&out.join("bench.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_datagen(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), Failure> {
    if !force {
        if let Ok(mut entries) = fs::read_dir(out) {
            if entries.next().is_some() {
                return Err(config_err(format!(
                    "{} is not empty; pass --force to write into it",
                    out.display()
                )));
            }
        }
    }
    let manifest = generate_dataset(&cfg.dataset_config(), out).map_err(|e| match e {
        navkit::datagen::DatasetError::Io { .. } => Failure {
            code: EXIT_IO,
            msg: e.to_string(),
        },
        other => config_err(other),
    })?;
    println!(
        "{} episodes, {} samples, {} expert collisions -> {}",
        manifest.episode_count,
        manifest.sample_count,
        manifest.collisions,
        out.join("manifest.json").display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli)?;
    if cli.show_config {
        print!("{}", cfg.resolved().to_toml());
        return Ok(0);
    }
    let Some(command) = cli.command else {
        return Err(config_err("no command given; see --help"));
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| config_err(format!("jobs: {e}")))?;
    pool.install(|| match command {
        Command::GenMaps { out, count, seed } => cmd_gen_maps(&cfg, &out, count, seed).map(|_| 0),
        Command::Run {
            grid,
            map_index,
            start,
            goal,
            agent,
            out,
        } => cmd_run(
            &cfg,
            RunArgs {
                grid,
                map_index,
                start,
                goal,
                agent,
                out,
            },
        ),
        Command::Bench { out } => cmd_bench(&cfg, &out).map(|_| 0),
        Command::Datagen { out, force } => cmd_datagen(&cfg, &out, force).map(|_| 0),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
