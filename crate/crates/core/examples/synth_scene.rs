//! Renders a scene for one camera and summarises the event stream and the
//! ground truth it comes with.
//!
//!     cargo run --release --example synth_scene [scene] [noise_rate]

use evtt::events::Polarity;
use evtt::synth::{find_scene, simulate_events, standard_rig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "synth4*".into());
    let mut spec = find_scene(&name, None)?;
    if let Some(rate) = args.next() {
        spec.noise_rate = rate.parse()?;
    }
    println!(
        "{name}: ball from ({:.2}, {:.2}, {:.2}) at {:.2} m/s, {} distractor(s), {:.2} s",
        spec.ball.position.x,
        spec.ball.position.y,
        spec.ball.position.z,
        spec.ball.velocity.norm(),
        spec.distractors.len(),
        spec.duration
    );
    println!("bounces at {:?} s", spec.flight().bounce_times());

    let sim = simulate_events(&spec, &standard_rig().left, 1e-3)?;
    let on = sim.events.iter().filter(|e| e.p == Polarity::On).count();
    println!("{} events ({on} ON, {} OFF)", sim.events.len(), sim.events.len() - on);
    for w in &sim.warnings {
        println!("warning: {w}");
    }

    // events in a 2 ms window around the middle of the flight, per 10 ms
    let visible: Vec<_> = sim.labels.iter().filter(|l| l.visible).collect();
    println!("ball visible in {} of {} labels", visible.len(), sim.labels.len());
    for l in visible.iter().step_by(50) {
        let near = sim
            .events
            .iter()
            .filter(|e| e.t + 2000 > l.t && e.t <= l.t)
            .filter(|e| ((e.x as f64 - l.u).powi(2) + (e.y as f64 - l.v).powi(2)).sqrt() <= l.r + 2.0)
            .count();
        println!(
            "t {:>6} us  centre ({:6.1}, {:5.1})  radius {:4.1} px  {near:>4} events on the ball",
            l.t, l.u, l.v, l.r
        );
    }
    Ok(())
}
