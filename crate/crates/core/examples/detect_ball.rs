//! Steps the detector window by window on a rendered scene and shows what
//! each stage kept and why clusters were rejected.
//!
//!     cargo run --release --example detect_ball [scene]

use evtt::detect::{DetectConfig, StageTimings, Tracker};
use evtt::events::windows;
use evtt::synth::{find_scene, simulate_events, standard_rig, SENSOR};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "synth6*".into());
    let spec = find_scene(&name, None)?;
    let cfg = DetectConfig::default();
    let sim = simulate_events(&spec, &standard_rig().left, 1e-3)?;

    let mut tracker = Tracker::new(SENSOR, cfg.clone())?;
    let mut timings = StageTimings::default();
    let (mut hits, mut rejected) = (0, 0);
    for (i, batch) in windows(sim.events, cfg.window_us, SENSOR).enumerate() {
        let roi = tracker.roi;
        let report = tracker.step_report(&batch, Some(&mut timings));
        rejected += report.rejections.len();
        hits += report.detection.is_some() as usize;
        if i % 25 == 0 {
            let what = match report.detection {
                Some(d) => format!("ball at ({:.1}, {:.1}) r {:.1} circ {:.2} sol {:.2}", d.u, d.v, d.r, d.circularity, d.solidity),
                None => "no ball".into(),
            };
            println!(
                "t {:>6}  roi {:>4}x{:<4} {:>6} events  {} clusters  {what}  rejected {:?}",
                batch.t_end,
                roi.x_max - roi.x_min,
                roi.y_max - roi.y_min,
                batch.len(),
                report.clusters,
                report.rejections
            );
        }
    }
    println!("{hits} detections over {} windows, {rejected} clusters rejected", timings.windows);
    for (stage, d) in timings.stages() {
        println!("  {stage:<9} {:8.1} us/window", d.as_secs_f64() * 1e6 / timings.windows as f64);
    }
    Ok(())
}
