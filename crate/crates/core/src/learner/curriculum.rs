use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    exploration_noise, migrate_buffer, Agent, AgentConfig, ExplorationSchedule, LearnerError, MigrationPolicy,
    ReplayBuffer, RewardConfig, RewardKind, Transition,
};
use crate::metrics::EpisodeRecord;
use crate::sim::{EnvConfig, LandingCase, RallyEnv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Serve speed, m/s.
    pub speed: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub stages: Vec<StageConfig>,
    pub reward: RewardConfig,
    pub reward_kind: RewardKind,
    pub exploration: ExplorationSchedule,
    pub agent: AgentConfig,
    pub migration: MigrationPolicy,
    /// Transitions stored before gradient updates begin.
    pub warmup: usize,
    pub updates_per_episode: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            stages: vec![
                StageConfig {
                    speed: 3.0,
                    episodes: 800,
                },
                StageConfig {
                    speed: 5.0,
                    episodes: 900,
                },
            ],
            reward: RewardConfig::default(),
            reward_kind: RewardKind::Cdta,
            exploration: ExplorationSchedule::default(),
            agent: AgentConfig::default(),
            migration: MigrationPolicy::default(),
            warmup: 32,
            updates_per_episode: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.stages.is_empty() {
            return Err(LearnerError::InvalidConfig("at least one stage is required".into()));
        }
        for s in &self.stages {
            self.env.clone().with_speed(s.speed).validate()?;
        }
        if self.warmup == 0 {
            return Err(LearnerError::InvalidConfig("warmup must be at least one transition".into()));
        }
        if let MigrationPolicy::Threshold(d) = self.migration {
            if d.is_nan() {
                return Err(LearnerError::InvalidConfig("migration threshold is NaN".into()));
            }
        }
        self.reward.validate()?;
        self.exploration.validate()?;
        self.agent.validate()
    }
}

/// Everything about one episode, for inspection beyond the CSV log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDetail {
    pub s: [f64; 6],
    pub g: [f64; 2],
    pub a: [f64; 3],
    pub case: LandingCase,
    /// First contact point after the return.
    pub f: [f64; 3],
    pub d: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub from_speed: f64,
    pub to_speed: f64,
    pub delta: f64,
    pub before: usize,
    pub kept: usize,
    /// Lowest reward among the inherited transitions.
    pub min_kept_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub log: Vec<EpisodeRecord>,
    pub details: Vec<EpisodeDetail>,
    pub migrations: Vec<MigrationReport>,
}

/// Greedy-policy evaluation during a stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Stage episodes completed before the evaluation.
    pub after: u64,
    pub return_rate: f64,
    /// Mean target distance of the successful returns.
    pub mean_d_mm: Option<f64>,
}

/// Curriculum state between stages. Clone it after a stage to branch runs
/// that share everything learned so far.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub log: Vec<EpisodeRecord>,
    pub details: Vec<EpisodeDetail>,
    pub migrations: Vec<MigrationReport>,
    env_seed: u64,
    /// Index of the active stage.
    current: Option<usize>,
    env: Option<RallyEnv>,
    /// Episodes run in the active stage.
    stage_n: u64,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self, LearnerError> {
        cfg.validate()?;
        let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agent = Agent::new(cfg.agent.clone(), seeds.next_u64())?;
        let buffer = ReplayBuffer::new(cfg.agent.buffer_capacity, seeds.next_u64());
        Ok(Self {
            env_seed: seeds.next_u64(),
            agent,
            buffer,
            cfg,
            log: Vec::new(),
            details: Vec::new(),
            migrations: Vec::new(),
            current: None,
            env: None,
            stage_n: 0,
        })
    }

    pub fn current_stage(&self) -> Option<usize> {
        self.current
    }

    /// Episodes run so far in the active stage.
    pub fn stage_episodes(&self) -> u64 {
        self.stage_n
    }

    /// Starts stage `idx` from its first episode, migrating the replay
    /// buffer if a different stage was active.
    pub fn switch_stage(&mut self, idx: usize) -> Result<(), LearnerError> {
        let to = self.stage(idx)?;
        if let Some(prev) = self.current {
            if prev != idx {
                let delta = self.cfg.migration.delta();
                let next = migrate_buffer(&self.buffer, delta);
                self.migrations.push(MigrationReport {
                    from_speed: self.cfg.stages[prev].speed,
                    to_speed: to.speed,
                    delta,
                    before: self.buffer.len(),
                    kept: next.len(),
                    min_kept_reward: next.iter().map(|t| t.r).reduce(f64::min),
                });
                self.buffer = next;
            }
        }
        self.env = Some(RallyEnv::new(
            self.cfg.env.clone().with_speed(to.speed),
            self.env_seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )?);
        self.current = Some(idx);
        self.stage_n = 0;
        Ok(())
    }

    fn stage(&self, idx: usize) -> Result<StageConfig, LearnerError> {
        self.cfg
            .stages
            .get(idx)
            .copied()
            .ok_or_else(|| LearnerError::InvalidConfig(format!("no stage {idx}")))
    }

    /// Runs every episode of stage `idx`. The episode counter used by the
    /// reward weights and the exploration schedule starts at zero.
    pub fn run_stage(&mut self, idx: usize) -> Result<(), LearnerError> {
        self.switch_stage(idx)?;
        self.run_episodes(self.stage(idx)?.episodes)
    }

    /// Continues the active stage for `count` episodes.
    pub fn run_episodes(&mut self, count: usize) -> Result<(), LearnerError> {
        let idx = self
            .current
            .ok_or_else(|| LearnerError::InvalidConfig("no active stage".into()))?;
        let speed = self.cfg.stages[idx].speed;
        let mut env = self.env.take().expect("active stage has an environment");
        let res = (0..count).try_for_each(|_| self.episode(&mut env, speed));
        self.env = Some(env);
        res
    }

    fn episode(&mut self, env: &mut RallyEnv, speed: f64) -> Result<(), LearnerError> {
        let n = self.stage_n;
        let episode = env.reset()?;
        let s = episode.serve.hit.as_array();
        let g = [episode.target.x, episode.target.y];
        let eta = exploration_noise(n, &self.cfg.exploration);
        let (a, q) = self.agent.act(&s, &g, eta);
        let out = env.step(&episode, &q);
        let r = self.cfg.reward_kind.reward(&out, n, &self.cfg.reward);
        let land = out.f;
        self.buffer.push(Transition {
            s,
            g,
            a,
            r,
            s_next: [land.x, land.y, land.z, out.velocity.x, out.velocity.y, out.velocity.z],
            n,
            stage: speed,
        });
        if self.buffer.len() >= self.cfg.warmup {
            for _ in 0..self.cfg.updates_per_episode {
                let batch = self.buffer.sample(self.cfg.agent.batch_size);
                self.agent.update(&batch)?;
            }
        }
        self.log.push(EpisodeRecord {
            n,
            stage: speed,
            case: out.case.number(),
            reward: r,
            d: out.d,
            eta,
        });
        self.details.push(EpisodeDetail {
            s,
            g,
            a,
            case: out.case,
            f: [land.x, land.y, land.z],
            d: out.d,
            reward: r,
        });
        self.stage_n += 1;
        Ok(())
    }

    /// Runs the rest of the active stage in chunks of `every` episodes and
    /// evaluates the averaged greedy policy on the same `episodes` serves
    /// after each.
    pub fn run_evaluated(&mut self, every: usize, episodes: usize, seed: u64) -> Result<Vec<EvalPoint>, LearnerError> {
        let idx = self
            .current
            .ok_or_else(|| LearnerError::InvalidConfig("no active stage".into()))?;
        if every == 0 {
            return Err(LearnerError::InvalidConfig("evaluation period must be positive".into()));
        }
        let stage = self.cfg.stages[idx];
        let mut points = Vec::new();
        while (self.stage_n as usize) < stage.episodes {
            let k = every.min(stage.episodes - self.stage_n as usize);
            self.run_episodes(k)?;
            let log = evaluate(&self.agent.averaged(), &self.cfg.env, stage.speed, episodes, &self.cfg.reward, seed)?;
            let score = crate::metrics::score_training(&log, episodes.max(1));
            points.push(EvalPoint {
                after: self.stage_n,
                return_rate: score.as_ref().map(|s| s.return_rate).unwrap_or(0.0),
                mean_d_mm: score.ok().and_then(|s| s.mean_d_mm),
            });
        }
        Ok(points)
    }

    pub fn run(mut self) -> Result<TrainOutcome, LearnerError> {
        for idx in 0..self.cfg.stages.len() {
            self.run_stage(idx)?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            agent: self.agent,
            log: self.log,
            details: self.details,
            migrations: self.migrations,
        }
    }
}

/// All stages in order with buffer migration at each boundary.
pub fn train_curriculum(cfg: TrainConfig) -> Result<TrainOutcome, LearnerError> {
    Trainer::new(cfg)?.run()
}

/// Greedy rollouts of a fixed policy at one serve speed. `n` in the log is
/// the rollout index; the reward uses the fully weighted accuracy term.
pub fn evaluate(
    agent: &Agent,
    env: &EnvConfig,
    speed: f64,
    episodes: usize,
    reward: &RewardConfig,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, LearnerError> {
    let mut env = RallyEnv::new(env.clone().with_speed(speed), seed)?;
    let mut out = Vec::with_capacity(episodes);
    for n in 0..episodes as u64 {
        let episode = env.reset()?;
        let s = episode.serve.hit.as_array();
        let g = [episode.target.x, episode.target.y];
        let q = agent.orientation(&agent.policy(&s, &g));
        let o = env.step(&episode, &q);
        out.push(EpisodeRecord {
            n,
            stage: speed,
            case: o.case.number(),
            reward: super::cdta_reward(&o, u64::MAX, reward),
            d: o.d,
            eta: 0.0,
        });
    }
    Ok(out)
}
