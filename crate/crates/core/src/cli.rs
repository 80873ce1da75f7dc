//! Command-line front end. Every data output is a pure function of the
//! inputs, the config and the seed; only `bench` reports wall-clock time.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::detect::{BallDetection2D, DetectConfig, StageTimings, Tracker};
use crate::events::{read_event_file, window_events, write_event_binary, write_event_csv, SensorDims};
use crate::geometry::{predict_from_observations, triangulate_detections, BallObservation3D, PredictorConfig, StereoRig};
use crate::learner::{checkpoint, evaluate, TrainConfig, Trainer};
use crate::metrics::{score_training, write_episode_csv};
use crate::synth::{find_scene, simulate_stereo, standard_rig, write_labels_csv, SceneSpec, SynthError, SENSOR};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or scene name.
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable or malformed input, or an output that could not be written.
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub episodes: usize,
    /// Serve speed; the last training stage's speed when absent.
    pub speed: Option<f64>,
    /// Window of the per-window series in the score.
    pub window: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 200,
            speed: None,
            window: 50,
        }
    }
}

/// Everything a subcommand may need. Unknown keys are rejected so a typo in
/// a hyper-parameter name cannot silently fall back to the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub sensor: SensorDims,
    /// Renderer step, seconds.
    pub dt_sim: f64,
    pub rig: StereoRig,
    pub detect: DetectConfig,
    /// Largest left/right timestamp gap joined into one stereo pair.
    pub join_tolerance_us: u64,
    pub predictor: PredictorConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            sensor: SENSOR,
            dt_sim: 1e-3,
            rig: standard_rig(),
            detect: DetectConfig::default(),
            join_tolerance_us: 1000,
            predictor: PredictorConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.detect.validate().map_err(config)?;
        self.train.validate().map_err(config)?;
        if !(self.dt_sim > 0.0) {
            return Err(config("dt_sim must be positive"));
        }
        if self.sensor.width == 0 || self.sensor.height == 0 {
            return Err(config("sensor dimensions must be positive"));
        }
        if self.eval.window == 0 {
            return Err(config("eval window must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "evtt", version, about = "Event-camera ball perception and hitting-policy learning")]
pub struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory. Single-file outputs go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a stereo scene to event files and ground-truth labels.
    Gen {
        /// Catalog scene name (synth1 .. synth7*) or a scene JSON file.
        scene: String,
        /// Write the fixed-width binary event format instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Detect the ball in one or two event files (left, then right).
    Detect {
        #[arg(num_args = 1..=2, required = true)]
        events: Vec<PathBuf>,
        /// Camera tag of a single input file.
        #[arg(long, default_value = "L")]
        cam: String,
    },
    /// Join left/right detections and triangulate them.
    Triangulate {
        /// Detection JSON-lines files; camera comes from each record.
        #[arg(num_args = 1.., required = true)]
        detections: Vec<PathBuf>,
    },
    /// Predict the hitting-plane crossing from triangulated observations.
    Predict { observations: PathBuf },
    /// Run the training curriculum.
    Train,
    /// Score a checkpoint's greedy policy.
    Eval {
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Per-stage detection latency on an event file.
    Bench { events: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("evtt: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen { scene, binary } => cmd_gen(&cfg, scene, *binary, out.unwrap_or(Path::new("."))),
        Command::Detect { events, cam } => cmd_detect(&cfg, events, cam, out),
        Command::Triangulate { detections } => cmd_triangulate(&cfg, detections, out),
        Command::Predict { observations } => cmd_predict(&cfg, observations, out),
        Command::Train => cmd_train(&cfg, out.unwrap_or(Path::new("."))),
        Command::Eval { checkpoint, episodes } => cmd_eval(&cfg, checkpoint, *episodes, out),
        Command::Bench { events } => cmd_bench(&cfg, events, out),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

/// Writes to `<dir>/<name>` or to stdout.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))
        }
        None => io::stdout().write_all(bytes).map_err(data),
    }
}

fn load_scene(name: &str) -> Result<SceneSpec, CliError> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| config(format!("{name}: {e}")))?;
        let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| config(format!("{name}: {e}")))?;
        return Ok(spec);
    }
    find_scene(name, None).map_err(config)
}

pub fn cmd_gen(cfg: &RunConfig, scene: &str, binary: bool, out: &Path) -> Result<(), CliError> {
    let mut spec = load_scene(scene)?;
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    let sim = simulate_stereo(&spec, &cfg.rig, cfg.dt_sim).map_err(|e| match e {
        SynthError::InvalidScene(_) | SynthError::StepTooLarge(_) => config(e),
        other => data(other),
    })?;
    for w in &sim.warnings {
        eprintln!("evtt: warning: {w}");
    }
    ensure_dir(out)?;
    for (cam, events) in [("L", &sim.left), ("R", &sim.right)] {
        let written = if binary {
            write_event_binary(out.join(format!("events_{cam}.evt")), cfg.sensor, events)
        } else {
            write_event_csv(out.join(format!("events_{cam}.csv")), events)
        };
        written.map_err(data)?;
    }
    write_labels_csv(out.join("labels.csv"), &sim.labels).map_err(data)?;
    let spec_json = serde_json::to_string_pretty(&spec).map_err(data)?;
    fs::write(out.join("scene.json"), spec_json + "\n").map_err(data)?;
    Ok(())
}

/// One line of `detect` output: a detection, or a window without one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectionLine {
    Hit {
        t: u64,
        cam: String,
        u: f64,
        v: f64,
        r: f64,
        gamma: f64,
        eta: f64,
    },
    Miss {
        t: u64,
        cam: String,
        miss: bool,
    },
}

impl DetectionLine {
    pub fn cam(&self) -> &str {
        match self {
            DetectionLine::Hit { cam, .. } | DetectionLine::Miss { cam, .. } => cam,
        }
    }

    pub fn detection(&self) -> Option<BallDetection2D> {
        match *self {
            DetectionLine::Hit {
                t, u, v, r, gamma, eta, ..
            } => Some(BallDetection2D {
                t,
                u,
                v,
                r,
                circularity: gamma,
                solidity: eta,
            }),
            DetectionLine::Miss { .. } => None,
        }
    }
}

/// Runs the tracker over one event file and tags every window.
pub fn detect_file(cfg: &RunConfig, path: &Path, cam: &str) -> Result<Vec<DetectionLine>, CliError> {
    let events = read_event_file(path, cfg.sensor).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let mut tracker = Tracker::new(cfg.sensor, cfg.detect.clone()).map_err(config)?;
    Ok(window_events(events, cfg.detect.window_us, cfg.sensor)
        .iter()
        .map(|b| match tracker.step(b) {
            Some(d) => DetectionLine::Hit {
                t: d.t,
                cam: cam.to_string(),
                u: d.u,
                v: d.v,
                r: d.r,
                gamma: d.circularity,
                eta: d.solidity,
            },
            None => DetectionLine::Miss {
                t: b.t_end,
                cam: cam.to_string(),
                miss: true,
            },
        })
        .collect())
}

fn jsonl<T: Serialize>(lines: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut buf, l).map_err(data)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn cmd_detect(cfg: &RunConfig, files: &[PathBuf], cam: &str, out: Option<&Path>) -> Result<(), CliError> {
    let lines = match files {
        [one] => detect_file(cfg, one, cam)?,
        [left, right] => {
            let (l, r) = std::thread::scope(|s| {
                let l = s.spawn(|| detect_file(cfg, left, "L"));
                let r = detect_file(cfg, right, "R");
                (l.join().expect("detector thread panicked"), r)
            });
            let mut all = l?;
            all.extend(r?);
            all
        }
        _ => return Err(config("detect takes one or two event files")),
    };
    emit(out, "detections.jsonl", &jsonl(&lines)?)
}

pub fn read_detection_lines(path: &Path) -> Result<Vec<DetectionLine>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| data(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub residual: f64,
}

impl From<&BallObservation3D> for ObservationRow {
    fn from(o: &BallObservation3D) -> Self {
        Self {
            t: o.t,
            x: o.position.x,
            y: o.position.y,
            z: o.position.z,
            residual: o.residual,
        }
    }
}

pub fn cmd_triangulate(cfg: &RunConfig, files: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for f in files {
        for line in read_detection_lines(f)? {
            let Some(d) = line.detection() else { continue };
            match line.cam() {
                "L" => left.push(d),
                "R" => right.push(d),
                other => return Err(data(format!("{}: unknown camera tag '{other}'", f.display()))),
            }
        }
    }
    left.sort_by_key(|d| d.t);
    right.sort_by_key(|d| d.t);
    let obs = triangulate_detections(&cfg.rig, &left, &right, cfg.join_tolerance_us);
    let mut w = csv::Writer::from_writer(Vec::new());
    for o in &obs {
        w.serialize(ObservationRow::from(o)).map_err(data)?;
    }
    if obs.is_empty() {
        w.write_record(["t", "x", "y", "z", "residual"]).map_err(data)?;
    }
    let bytes = w.into_inner().map_err(data)?;
    emit(out, "observations.csv", &bytes)
}

pub fn read_observations(path: &Path) -> Result<Vec<BallObservation3D>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    r.deserialize::<ObservationRow>()
        .map(|row| {
            let row = row.map_err(|e| data(format!("{}: {e}", path.display())))?;
            Ok(BallObservation3D {
                t: row.t,
                position: Vector3::new(row.x, row.y, row.z),
                residual: row.residual,
            })
        })
        .collect()
}

pub fn cmd_predict(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let obs = read_observations(path)?;
    if obs.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(data("observation timestamps must be strictly increasing"));
    }
    let prediction = predict_from_observations(&obs, &cfg.predictor);
    if prediction.best().is_none() {
        return Err(data(format!("no hitting-plane estimate from {} observations", obs.len())));
    }
    let text = serde_json::to_string_pretty(&prediction).map_err(data)? + "\n";
    emit(out, "prediction.json", text.as_bytes())
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut tc = cfg.train.clone();
    if let Some(seed) = cfg.seed {
        tc.seed = seed;
    }
    let total: usize = tc.stages.iter().map(|s| s.episodes).sum();
    let clock = Instant::now();
    let outcome = Trainer::new(tc).map_err(config)?.run().map_err(data)?;
    ensure_dir(out)?;
    checkpoint::save(&outcome.agent, out.join("agent.ttag")).map_err(data)?;
    let mut csv = Vec::new();
    write_episode_csv(&mut csv, &outcome.log).map_err(data)?;
    fs::write(out.join("metrics.csv"), csv).map_err(data)?;
    let migrations = serde_json::to_string_pretty(&outcome.migrations).map_err(data)? + "\n";
    fs::write(out.join("migrations.json"), migrations).map_err(data)?;
    eprintln!("evtt: trained {total} episodes in {:.1} s", clock.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, path: &Path, episodes: Option<usize>, out: Option<&Path>) -> Result<(), CliError> {
    let agent = checkpoint::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let speed = cfg
        .eval
        .speed
        .or_else(|| cfg.train.stages.last().map(|s| s.speed))
        .ok_or_else(|| config("no evaluation speed and no training stages"))?;
    let episodes = episodes.unwrap_or(cfg.eval.episodes);
    if episodes == 0 {
        return Err(config("evaluation needs at least one episode"));
    }
    let log = evaluate(&agent, &cfg.train.env, speed, episodes, &cfg.train.reward, cfg.seed.unwrap_or(0)).map_err(config)?;
    let score = score_training(&log, cfg.eval.window).map_err(data)?;
    let text = serde_json::to_string_pretty(&score).map_err(data)? + "\n";
    emit(out, "eval.json", text.as_bytes())
}

/// Mean time per window spent in one detection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub stage: String,
    pub us_per_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub windows: u64,
    pub events: usize,
    pub detections: usize,
    pub seconds: f64,
    pub events_per_sec: f64,
    pub stages: Vec<StageLatency>,
    pub total_us_per_window: f64,
}

pub fn bench_events(cfg: &RunConfig, path: &Path) -> Result<BenchReport, CliError> {
    let events = read_event_file(path, cfg.sensor).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let n = events.len();
    let batches = window_events(events, cfg.detect.window_us, cfg.sensor);
    let mut tracker = Tracker::new(cfg.sensor, cfg.detect.clone()).map_err(config)?;
    let mut tm = StageTimings::default();
    let mut detections = 0;
    let clock = Instant::now();
    for b in &batches {
        detections += tracker.step_report(b, Some(&mut tm)).detection.is_some() as usize;
    }
    let seconds = clock.elapsed().as_secs_f64();
    let per = |d: std::time::Duration| d.as_secs_f64() * 1e6 / tm.windows.max(1) as f64;
    Ok(BenchReport {
        windows: tm.windows,
        events: n,
        detections,
        seconds,
        events_per_sec: n as f64 / seconds.max(1e-9),
        stages: tm
            .stages()
            .iter()
            .map(|(s, d)| StageLatency {
                stage: s.to_string(),
                us_per_window: per(*d),
            })
            .collect(),
        total_us_per_window: per(tm.total()),
    })
}

pub fn cmd_bench(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let report = bench_events(cfg, path)?;
    let text = serde_json::to_string_pretty(&report).map_err(data)? + "\n";
    emit(out, "bench.json", text.as_bytes())
}
