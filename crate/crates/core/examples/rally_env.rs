//! Draws serves from the rally environment and plays them back with a grid
//! of racket orientations: how many are returned, and how close the best one
//! lands to the target. Shows the rewards each landing would earn.
//!
//!     cargo run --release --example rally_env [speed] [serves]

use evtt::learner::{action_to_quaternion, cdta_reward, simple_reward, AgentConfig, RewardConfig};
use evtt::sim::{EnvConfig, LandingCase, RallyEnv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let speed: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3.0);
    let serves: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let agent = AgentConfig::default();
    let reward = RewardConfig::default();
    let mut env = RallyEnv::new(EnvConfig::default().with_speed(speed), 11)?;

    let steps = 9;
    let grid = |i: usize| -1.0 + 2.0 * i as f64 / (steps - 1) as f64;
    for k in 0..serves {
        let ep = env.reset()?;
        let h = ep.serve.hit;
        println!(
            "serve {k}: hit at ({:.2}, {:+.2}, {:.2}) moving ({:.2}, {:+.2}, {:+.2}) m/s after {} redraws, target ({:+.2}, {:+.2})",
            h.position.x, h.position.y, h.position.z, h.velocity.x, h.velocity.y, h.velocity.z, ep.serve.redraws, ep.target.x, ep.target.y
        );
        let mut counts = [0usize; 4];
        let mut best: Option<([f64; 3], f64)> = None;
        for i in 0..steps {
            for j in 0..steps {
                let a = [grid(i), grid(j), 0.0];
                let o = env.step(&ep, &action_to_quaternion(&a, &agent.base(), agent.max_rotation_deg));
                counts[o.case.number() as usize - 1] += 1;
                if o.case == LandingCase::Returned && best.is_none_or(|(_, d)| o.d < d) {
                    best = Some((a, o.d));
                }
            }
        }
        println!("  {} orientations: own half {}, net {}, out {}, returned {}", steps * steps, counts[0], counts[1], counts[2], counts[3]);
        let base = env.step(&ep, &agent.base());
        println!(
            "  base orientation: case {:?}, d {:.3} m, reward {:.3} early / {:.3} late, simple {}",
            base.case,
            base.d,
            cdta_reward(&base, 0, &reward),
            cdta_reward(&base, 1000, &reward),
            simple_reward(&base)
        );
        if let Some((a, d)) = best {
            let o = env.step(&ep, &action_to_quaternion(&a, &agent.base(), agent.max_rotation_deg));
            println!(
                "  closest return: action ({:+.2}, {:+.2}) lands ({:+.2}, {:+.2}), {:.0} mm from target, late reward {:.3}",
                a[0],
                a[1],
                o.f.x,
                o.f.y,
                d * 1e3,
                cdta_reward(&o, 1000, &reward)
            );
        }
    }
    Ok(())
}
