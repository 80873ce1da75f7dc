//! Runs the detector on every catalog scene, both cameras, and scores it
//! against the rendered ground truth.
//!
//!     cargo run --release --example score_detections [scene ...]

use std::time::Instant;

use evtt::detect::{DetectConfig, Tracker};
use evtt::events::windows;
use evtt::metrics::{labels_at_period, score_detections, DEFAULT_MATCH_RADIUS};
use evtt::synth::{simulate_events, standard_rig, standard_scenes, SENSOR};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let only: Vec<String> = std::env::args().skip(1).collect();
    let rig = standard_rig();
    let cfg = DetectConfig::default();
    println!("scene      cam  windows  precision  recall  err_px  tp  fp  fn  secs");
    for (name, spec) in standard_scenes() {
        if !only.is_empty() && !only.iter().any(|o| name.trim_end_matches('*') == o.trim_end_matches('*')) {
            continue;
        }
        for (cam, camera) in [("L", &rig.left), ("R", &rig.right)] {
            let clock = Instant::now();
            let sim = simulate_events(&spec, camera, 1e-3)?;
            let batches: Vec<_> = windows(sim.events, cfg.window_us, SENSOR).collect();
            let n = batches.len();
            let mut tracker = Tracker::new(SENSOR, cfg.clone())?;
            let dets = tracker.run(batches);
            let labels = labels_at_period(&sim.labels, cfg.window_us);
            let s = score_detections(&dets, &labels, DEFAULT_MATCH_RADIUS)?;
            println!(
                "{name:<10} {cam}   {n:>7}  {:>9.4}  {:>6.4}  {:>6.3}  {:>3} {:>3} {:>3}  {:.2}",
                s.precision,
                s.recall,
                s.mean_error_px.unwrap_or(f64::NAN),
                s.true_positives,
                s.false_positives,
                s.false_negatives,
                clock.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
