use std::path::Path;
use std::process::{Command, Output};

fn navkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let top = stdout(&navkit(&["--help"]));
    for flag in [
        "--config",
        "--set",
        "--jobs",
        "--show-config",
        "gen-maps",
        "run",
        "bench",
        "datagen",
        "Exit codes",
    ] {
        assert!(top.contains(flag), "missing {flag}");
    }
    let run = stdout(&navkit(&["run", "--help"]));
    for flag in [
        "--grid",
        "--map-index",
        "--start",
        "--goal",
        "--agent",
        "--out",
    ] {
        assert!(run.contains(flag), "run is missing {flag}");
    }
    assert!(stdout(&navkit(&["datagen", "--help"])).contains("--force"));
}

#[test]
fn show_config_prints_documented_defaults() {
    let out = navkit(&["--show-config"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg: toml::Table = toml::from_str(&stdout(&out)).unwrap();
    let num = |section: &str, key: &str| -> f64 {
        let v = &cfg[section][key];
        v.as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .unwrap()
    };
    let documented = [
        ("vehicle", "v_max", 0.6),
        ("vehicle", "omega_max", 1.1),
        ("vehicle", "dt", 0.05),
        ("expert", "lambda1", 0.3),
        ("expert", "lambda2", 1.0),
        ("expert", "planning_horizon", 6.0),
        ("expert", "control_horizon", 1.5),
        ("expert", "r_min", 0.3),
        ("expert", "r_max", 0.6 * 6.0),
        ("expert", "n_r", 10.0),
        ("expert", "n_bearing", 15.0),
        ("expert", "n_theta", 7.0),
        ("expert", "fov", std::f64::consts::FRAC_PI_2),
        ("expert", "terminal_speed", 0.3),
        ("expert", "success_radius", 0.3),
        ("expert", "robot_radius", 0.0),
        ("sensor", "fov", std::f64::consts::FRAC_PI_2),
        ("sensor", "n_rays", 128.0),
        ("sensor", "max_range", 3.0),
    ];
    for (section, key, value) in documented {
        assert_eq!(num(section, key), value, "{section}.{key}");
    }
    let q = cfg["lqr"]["q"].as_array().unwrap();
    let diag: Vec<f64> = (0..3)
        .map(|i| q[i].as_array().unwrap()[i].as_float().unwrap())
        .collect();
    assert_eq!(diag, [1.0, 1.0, 0.5]);
    let qf = cfg["lqr"]["q_final"].as_array().unwrap();
    assert_eq!(qf[2].as_array().unwrap()[2].as_float(), Some(5.0));
    assert_eq!(
        cfg["maps"].as_array().unwrap()[0]["resolution"].as_float(),
        Some(0.05)
    );
}

#[test]
fn gen_maps_names_files_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = navkit(&["gen-maps", "--out", arg(dir), "--count", "3", "--seed", "1"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["map_0001.grid", "map_0002.grid", "map_0003.grid"]);
    for n in &names {
        let bytes = std::fs::read(a.path().join(n)).unwrap();
        assert!(bytes.starts_with(b"NAVGRID1"));
        assert_eq!(bytes, std::fs::read(b.path().join(n)).unwrap());
    }
}

#[test]
fn invalid_spec_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = navkit(&[
        "--set",
        "maps=[{density=1.5}]",
        "gen-maps",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("density"), "{}", stderr(&out));

    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[expert]\nlamda1 = 0.2\n").unwrap();
    let out = navkit(&["--config", arg(&cfg), "--show-config"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lamda1"));

    let out = navkit(&[
        "--config",
        arg(&dir.path().join("missing.toml")),
        "--show-config",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn open_map_run_is_straight_with_steady_cruise() {
    let dir = tempfile::tempdir().unwrap();
    let out = navkit(&[
        "run",
        "--set",
        "maps=[{density=0.0}]",
        "--start",
        "1,5,0",
        "--goal",
        "9,5",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(
        rows[0],
        ["t", "x", "y", "phi", "v", "omega", "d_obs", "d_goal"]
    );
    let body = &rows[1..];
    assert_eq!(body.last().unwrap()[4], "NA");
    let f = |r: &Vec<String>, c: usize| r[c].parse::<f64>().unwrap();
    // lateral drift stays within a few centimeters over 8 m
    assert!(body.iter().all(|r| (f(r, 2) - 5.0).abs() < 0.1));
    // cruise: between the ramp and the final approach speed holds near v_max
    let cruise: Vec<f64> = body
        .iter()
        .filter(|r| (4.5..=12.0).contains(&f(r, 0)))
        .map(|r| f(r, 4))
        .collect();
    assert!(!cruise.is_empty());
    assert!(
        cruise.iter().all(|&v| (0.55..=0.6).contains(&v)),
        "{cruise:?}"
    );

    let svg = std::fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains(r#"r="18.00""#));
}

#[test]
fn exit_codes_separate_success_collision_and_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let collision = navkit(&[
        "run",
        "--set",
        "maps=[{seed=101,density=0.2,min_size=0.3,max_size=0.8}]",
        "--set",
        "sensor.fov=1.0471975511965976",
        "--agent",
        "mapping-memoryless",
        "--start",
        "6.55,0.6,0.1603781245234508",
        "--goal",
        "4.75,0.35",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(collision.status.code(), Some(2), "{}", stdout(&collision));
    assert!(stdout(&collision).contains("collision"));

    let timeout = navkit(&[
        "run",
        "--set",
        "maps=[{density=0.0}]",
        "--set",
        "expert.max_episode_time=3",
        "--start",
        "1,5,0",
        "--goal",
        "9,5",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(timeout.status.code(), Some(4));

    let usage = navkit(&["run", "--start", "1,5,0"]);
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn bench_writes_rows_for_each_agent() {
    let dir = tempfile::tempdir().unwrap();
    let out = navkit(&[
        "bench",
        "--set",
        "suite.episodes=2",
        "--set",
        r#"agents=["expert","mapping-memoryless","mapping-memory"]"#,
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("bench.csv"));
    let agents: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(agents, ["expert", "mapping-memoryless", "mapping-memory"]);
    assert_eq!(rows[1][1], "100.00");
    assert!(std::fs::read_to_string(dir.path().join("bench.txt"))
        .unwrap()
        .contains("Success (%)"));

    let empty = navkit(&["bench", "--set", "agents=[]", "--out", arg(dir.path())]);
    assert_eq!(empty.status.code(), Some(1));
}

#[test]
fn datagen_counts_refuses_and_reproduces() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let args = |out: &Path| {
        vec![
            "datagen".to_string(),
            "--set".into(),
            "maps=[{seed=1},{seed=2}]".into(),
            "--set".into(),
            "datagen.episodes_per_map=5".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |v: Vec<String>| {
        Command::new(env!("CARGO_BIN_EXE_navkit"))
            .args(v)
            .output()
            .unwrap()
    };
    assert_eq!(run(args(&a)).status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["episode_count"], 10);
    assert_eq!(manifest["format_version"], "1");

    let refused = run(args(&a));
    assert_eq!(refused.status.code(), Some(1));
    assert!(stderr(&refused).contains("--force"));
    let mut forced = args(&a);
    forced.push("--force".into());
    assert_eq!(run(forced).status.code(), Some(0));

    let mut single = args(&b);
    single.extend(["--jobs".to_string(), "1".into()]);
    assert_eq!(run(single).status.code(), Some(0));
    for name in [
        "manifest.json",
        "map_0001.grid",
        "map_0002.grid",
        "samples_0001.jsonl",
        "samples_0002.jsonl",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}
