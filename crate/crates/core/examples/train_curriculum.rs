//! Trains the hitting policy through a 3 m/s then 5 m/s curriculum with
//! reward-threshold replay migration, printing return rate and target
//! distance per 50 episodes, then saves and reloads the agent.
//!
//!     cargo run --release --example train_curriculum [seed] [episodes_per_stage]

use evtt::learner::{checkpoint, evaluate, StageConfig, TrainConfig, Trainer};
use evtt::metrics::score_training;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let per_stage: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(400);
    let cfg = TrainConfig {
        seed,
        stages: vec![StageConfig { speed: 3.0, episodes: per_stage }, StageConfig { speed: 5.0, episodes: per_stage }],
        ..Default::default()
    };
    let clock = std::time::Instant::now();
    let mut trainer = Trainer::new(cfg.clone())?;
    for idx in 0..cfg.stages.len() {
        let start = trainer.log.len();
        trainer.run_stage(idx)?;
        if let Some(m) = trainer.migrations.last().filter(|_| idx > 0) {
            println!("migration {} -> {} m/s: kept {} of {} transitions (delta {})", m.from_speed, m.to_speed, m.kept, m.before, m.delta);
        }
        let score = score_training(&trainer.log[start..], 50)?;
        println!("stage {idx} at {} m/s", cfg.stages[idx].speed);
        for w in &score.series {
            let d = w.mean_d_mm.map_or("-".into(), |d| format!("{d:.0} mm"));
            println!("  episodes {:>4}-{:<4} return {:.2}  distance {d}", w.start, w.start + w.episodes - 1, w.return_rate);
        }
    }
    let out = trainer.finish();
    println!("trained in {:.1} s", clock.elapsed().as_secs_f64());

    let path = std::env::temp_dir().join(format!("evtt-agent-{seed}.ttag"));
    checkpoint::save(&out.agent, &path)?;
    let agent = checkpoint::load(&path)?;
    for stage in &cfg.stages {
        let s = score_training(&evaluate(&agent, &cfg.env, stage.speed, 500, &cfg.reward, 99)?, 500)?;
        println!(
            "greedy at {} m/s: return {:.3}, distance {}",
            stage.speed,
            s.return_rate,
            s.mean_d_mm.map_or("-".into(), |d| format!("{d:.0} mm"))
        );
    }
    println!("checkpoint {}", path.display());
    Ok(())
}
