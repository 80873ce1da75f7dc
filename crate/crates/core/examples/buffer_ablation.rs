//! Compares what to do with the replay buffer when the serve speed rises:
//! drop it, keep it, or keep only transitions with non-negative reward.
//! Each arm continues from the same 3 m/s agent and is evaluated on a fixed
//! serve set every 50 episodes at 5 m/s.
//!
//!     cargo run --release --example buffer_ablation [seed] [episodes_per_stage]

use evtt::learner::{MigrationPolicy, StageConfig, TrainConfig, Trainer};
use evtt::metrics::score_training;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let per_stage: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(400);
    let cfg = TrainConfig {
        seed,
        stages: vec![StageConfig { speed: 3.0, episodes: per_stage }, StageConfig { speed: 5.0, episodes: per_stage }],
        updates_per_episode: 16,
        ..Default::default()
    };
    let mut stage1 = Trainer::new(cfg)?;
    stage1.run_stage(0)?;
    let s1 = score_training(&stage1.log[per_stage.saturating_sub(50)..], 50)?;
    println!("after {per_stage} episodes at 3 m/s: return rate {:.2}", s1.return_rate);

    for (name, policy) in [
        ("discard", MigrationPolicy::Discard),
        ("retain", MigrationPolicy::Retain),
        ("threshold 0", MigrationPolicy::Threshold(0.0)),
    ] {
        let mut arm = stage1.clone();
        arm.cfg.migration = policy;
        arm.switch_stage(1)?;
        let kept = arm.migrations.last().map_or(0, |m| m.kept);
        let points = arm.run_evaluated(50, 500, 7)?;
        let train = score_training(&arm.log[per_stage..], 50)?;
        println!("{name}: kept {kept} transitions");
        for (p, w) in points.iter().zip(&train.series) {
            println!(
                "  after {:>3}  training return {:.2}  greedy return {:.2}  greedy distance {}",
                p.after,
                w.return_rate,
                p.return_rate,
                p.mean_d_mm.map_or("-".into(), |d| format!("{d:.0} mm"))
            );
        }
    }
    Ok(())
}
