//! The `evtt` binary as a process: outputs, exit codes and determinism.

use std::path::Path;
use std::process::{Command, Output};

use evtt::cli::{BenchReport, DetectionLine};
use evtt::learner::{checkpoint, MigrationReport, StageConfig, TrainConfig, Trainer};
use evtt::synth::read_labels_csv;

fn evtt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evtt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn detection_lines(bytes: &[u8]) -> Vec<DetectionLine> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn detect_finds_the_ball_in_visible_windows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&evtt(d, &["gen", "synth1", "--binary", "--out", "g"])), 0);
    assert!(d.join("g/events_L.evt").exists() && d.join("g/events_R.evt").exists());
    let out = evtt(d, &["detect", "g/events_L.evt", "--cam", "L"]);
    assert_eq!(code(&out), 0);
    let lines = detection_lines(&out.stdout);
    let labels = read_labels_csv(d.join("g/labels.csv")).unwrap();

    // windows that end while the ball is fully in view
    let visible: Vec<u64> = lines
        .iter()
        .map(|l| match l {
            DetectionLine::Hit { t, .. } | DetectionLine::Miss { t, .. } => *t,
        })
        .filter(|t| labels.iter().any(|l| l.t == *t && l.visible))
        .collect();
    let hits = lines
        .iter()
        .filter_map(|l| l.detection())
        .filter(|det| visible.contains(&det.t))
        .count();
    assert!(visible.len() > 100);
    assert!(hits as f64 >= 0.95 * visible.len() as f64, "{hits} of {}", visible.len());
    assert!(lines.iter().all(|l| l.cam() == "L"));
}

#[test]
fn empty_input_gives_no_detections() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.csv"), "").unwrap();
    let out = evtt(d, &["detect", "empty.csv"]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("typo.json"), r#"{"detect": {"min_sample": 4}}"#).unwrap();
    std::fs::write(d.join("broken.json"), "{").unwrap();
    std::fs::write(d.join("junk.csv"), "t,x,y,p\n1,2\n").unwrap();
    std::fs::write(d.join("late.csv"), "t,x,y,p\n5,1,1,1\n2,1,1,1\n").unwrap();
    assert_eq!(code(&evtt(d, &["detect", "junk.csv", "--config", "typo.json"])), 2);
    assert_eq!(code(&evtt(d, &["train", "--config", "broken.json"])), 2);
    assert_eq!(code(&evtt(d, &["train", "--config", "missing.json"])), 2);
    assert_eq!(code(&evtt(d, &["gen", "synth42"])), 2);
    assert_eq!(code(&evtt(d, &["detect"])), 2);
    assert_eq!(code(&evtt(d, &["detect", "junk.csv"])), 3);
    assert_eq!(code(&evtt(d, &["detect", "late.csv"])), 3);
    assert_eq!(code(&evtt(d, &["bench", "nothing.csv"])), 3);
    assert_eq!(code(&evtt(d, &["eval", "junk.csv"])), 3);
}

const TWO_STAGE: &str = r#"{"train": {"stages": [{"speed": 3.0, "episodes": 40}, {"speed": 5.0, "episodes": 30}], "agent": {"hidden": [16, 16]}}}"#;

#[test]
fn train_writes_checkpoint_log_and_one_migration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), TWO_STAGE).unwrap();
    assert_eq!(code(&evtt(d, &["train", "--config", "run.json", "--seed", "4", "--out", "t"])), 0);
    let log = evtt::metrics::read_episode_csv(d.join("t/metrics.csv")).unwrap();
    assert_eq!(log.len(), 70);
    assert_eq!(log[40].n, 0);
    assert_eq!(log[40].stage, 5.0);
    let header = std::fs::read_to_string(d.join("t/metrics.csv")).unwrap();
    assert!(header.starts_with("n,stage,case,reward,d,eta\n"));
    let migrations: Vec<MigrationReport> =
        serde_json::from_str(&std::fs::read_to_string(d.join("t/migrations.json")).unwrap()).unwrap();
    assert_eq!(migrations.len(), 1);
    assert_eq!((migrations[0].from_speed, migrations[0].to_speed, migrations[0].before), (3.0, 5.0, 40));
    assert!(checkpoint::load(d.join("t/agent.ttag")).is_ok());
}

#[test]
fn zero_episode_training_saves_the_initial_agent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("zero.json"),
        r#"{"train": {"stages": [{"speed": 3.0, "episodes": 0}], "agent": {"hidden": [8, 8]}}}"#,
    )
    .unwrap();
    assert_eq!(code(&evtt(d, &["train", "--config", "zero.json", "--seed", "11", "--out", "z"])), 0);
    let saved = checkpoint::load(d.join("z/agent.ttag")).unwrap();
    let mut cfg = TrainConfig {
        seed: 11,
        stages: vec![StageConfig {
            speed: 3.0,
            episodes: 0,
        }],
        ..Default::default()
    };
    cfg.agent.hidden = vec![8, 8];
    assert_eq!(saved, Trainer::new(cfg).unwrap().agent);
}

#[test]
fn eval_is_deterministic_and_seed_dependent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), TWO_STAGE).unwrap();
    assert_eq!(code(&evtt(d, &["train", "--config", "run.json", "--out", "t"])), 0);
    let eval = |seed: &str| {
        let o = evtt(d, &["eval", "t/agent.ttag", "--config", "run.json", "--episodes", "60", "--seed", seed]);
        assert_eq!(code(&o), 0);
        o.stdout
    };
    let a = eval("1");
    assert_eq!(a, eval("1"));
    let score: evtt::metrics::TrainingScore = serde_json::from_slice(&a).unwrap();
    assert_eq!(score.series.iter().map(|w| w.episodes).sum::<usize>(), 60);
    assert_ne!(a, eval("2"));
}

#[test]
fn bench_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&evtt(d, &["gen", "synth3", "--out", "g"])), 0);
    let out = evtt(d, &["bench", "g/events_R.csv"]);
    assert_eq!(code(&out), 0);
    let report: BenchReport = serde_json::from_slice(&out.stdout).unwrap();
    let stages: Vec<&str> = report.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, ["clip", "denoise", "cluster", "polarity", "verify", "localize"]);
    assert!(report.events_per_sec > 0.0 && report.windows > 0 && report.detections > 0);
}

#[test]
fn stereo_chain_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&evtt(d, &["gen", "synth1", "--seed", "2", "--out", "g"])), 0);
    assert_eq!(code(&evtt(d, &["detect", "g/events_L.csv", "--cam", "L", "--out", "l"])), 0);
    assert_eq!(code(&evtt(d, &["detect", "g/events_R.csv", "--cam", "R", "--out", "r"])), 0);
    let tri = evtt(d, &["triangulate", "l/detections.jsonl", "r/detections.jsonl"]);
    assert_eq!(code(&tri), 0);
    std::fs::write(d.join("obs.csv"), &tri.stdout).unwrap();
    let text = String::from_utf8(tri.stdout).unwrap();
    assert!(text.starts_with("t,x,y,z,residual\n"));
    assert!(text.lines().count() > 100);

    let pred = evtt(d, &["predict", "obs.csv"]);
    assert_eq!(code(&pred), 0);
    let p: evtt::geometry::Prediction = serde_json::from_slice(&pred.stdout).unwrap();
    let hit = p.best().unwrap();
    assert!((hit.position.x - 1.6).abs() < 1e-9);

    // too few observations for any fit is a data error
    let short: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    std::fs::write(d.join("short.csv"), short).unwrap();
    assert_eq!(code(&evtt(d, &["predict", "short.csv"])), 3);
}
