//! Renders a stereo scene, detects the ball in both cameras, triangulates the
//! detections and predicts where the ball crosses the hitting plane.
//!
//!     cargo run --release --example stereo_pipeline [scene] [noise_rate]

use evtt::detect::{DetectConfig, Tracker};
use evtt::events::windows;
use evtt::geometry::{predict_from_observations, triangulate_detections, PredictorConfig};
use evtt::synth::{find_scene, simulate_stereo, standard_rig, SENSOR};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "synth1".into());
    let mut spec = find_scene(&name, None)?;
    if let Some(rate) = args.next() {
        spec.noise_rate = rate.parse()?;
    }
    let rig = standard_rig();
    let cfg = DetectConfig::default();
    let sim = simulate_stereo(&spec, &rig, 1e-3)?;

    let detect = |events: Vec<_>| -> Result<_, Box<dyn std::error::Error>> {
        let mut tracker = Tracker::new(SENSOR, cfg.clone())?;
        Ok(tracker.run(windows(events, cfg.window_us, SENSOR)))
    };
    let left = detect(sim.left)?;
    let right = detect(sim.right)?;
    let obs = triangulate_detections(&rig, &left, &right, 1000);
    println!("{name}: {} / {} detections, {} stereo observations", left.len(), right.len(), obs.len());

    let pcfg = PredictorConfig::default();
    let truth = spec.flight().plane_crossing(pcfg.hitting_plane_x, 0.0).ok_or("ball never reaches the plane")?;
    let prediction = predict_from_observations(&obs, &pcfg);
    println!("true crossing    t {:.4} s  p ({:.4}, {:.4}, {:.4})", truth.0, truth.1.x, truth.1.y, truth.1.z);
    if let Some(tb) = prediction.bounce_time {
        println!("bounce seen at   t {tb:.4} s (true {:?})", spec.flight().bounce_times());
    }
    for (label, hit) in [("pre-bounce", prediction.pre_bounce), ("post-bounce", prediction.post_bounce)] {
        match hit {
            Some(h) => println!(
                "{label:<12}     t {:.4} s  p ({:.4}, {:.4}, {:.4})  error {:.1} mm / {:.2} ms",
                h.t_c,
                h.position.x,
                h.position.y,
                h.position.z,
                (h.position - truth.1).norm() * 1e3,
                (h.t_c - truth.0).abs() * 1e3
            ),
            None => println!("{label:<12}     no estimate"),
        }
    }
    Ok(())
}
