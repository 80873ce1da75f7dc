//! One-step actor-critic learner for the racket orientation: case-dependent
//! reward with a time-varying success term, replay migration between speed
//! stages, exploration schedule and the curriculum driver.

mod agent;
mod buffer;
pub mod checkpoint;
mod curriculum;
pub mod nn;

pub use agent::{
    action_to_quaternion, actor_objective, facing_back, actor_objective_grad, critic_loss, critic_loss_grad, Agent, AgentConfig,
    Normalizer, UpdateStats,
};
pub use buffer::{migrate_buffer, ReplayBuffer, Transition};
pub use curriculum::{evaluate, train_curriculum, EpisodeDetail, EvalPoint, MigrationReport, StageConfig, TrainConfig, TrainOutcome, Trainer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{LandingCase, LandingOutcome, SimError};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Penalty for landing on the robot's own half.
    pub lambda1: f64,
    /// Penalty for a net ball.
    pub lambda2: f64,
    /// Penalty for an out ball.
    pub lambda3: f64,
    pub lambda_base: f64,
    pub lambda_scale: f64,
    /// Decay rate of the base-reward weight per episode.
    pub beta: f64,
    pub h_net: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda_base: 1.0,
            lambda_scale: 2.0,
            beta: 0.01,
            h_net: 0.1525,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let all = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda_base,
            self.lambda_scale,
            self.beta,
            self.h_net,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(LearnerError::InvalidConfig("reward coefficients must be finite and positive".into()))
        }
    }
}

/// Weights of the base and the accuracy term: `(e^{-βn}, 1 - e^{-βn})`.
pub fn cdta_weights(n: u64, beta: f64) -> (f64, f64) {
    let w1 = (-beta * n as f64).exp();
    (w1, 1.0 - w1)
}

/// Case-dependent reward; successful returns blend a base reward with a
/// target-accuracy bonus whose weight grows with the episode index.
pub fn cdta_reward(o: &LandingOutcome, n: u64, cfg: &RewardConfig) -> f64 {
    match o.case {
        LandingCase::OwnHalf => -cfg.lambda1 * o.d2 / o.d_max2,
        LandingCase::Net => -cfg.lambda2 * (1.0 - o.f.z / cfg.h_net),
        LandingCase::Out => -cfg.lambda3 * o.d3 / o.d_max3,
        LandingCase::Returned => {
            let (w1, w2) = cdta_weights(n, cfg.beta);
            let accuracy = (1.0 - o.d / o.d_max).max(0.0);
            w1 * cfg.lambda_base + w2 * (cfg.lambda_base + cfg.lambda_scale * accuracy)
        }
    }
}

/// 1 for a successful return, 0 otherwise.
pub fn simple_reward(o: &LandingOutcome) -> f64 {
    if o.case == LandingCase::Returned {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Cdta,
    /// Success-only baseline.
    Simple,
}

impl RewardKind {
    pub fn reward(self, o: &LandingOutcome, n: u64, cfg: &RewardConfig) -> f64 {
        match self {
            RewardKind::Cdta => cdta_reward(o, n, cfg),
            RewardKind::Simple => simple_reward(o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationSchedule {
    pub eta0: f64,
    pub eta_min: f64,
    pub gamma_exp: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            eta0: 0.1,
            eta_min: 0.05,
            gamma_exp: 0.995,
        }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let ok = self.eta_min >= 0.0 && self.eta_min <= self.eta0 && self.gamma_exp > 0.0 && self.gamma_exp < 1.0;
        if ok {
            Ok(())
        } else {
            Err(LearnerError::InvalidConfig(
                "exploration needs 0 <= eta_min <= eta0 and 0 < gamma_exp < 1".into(),
            ))
        }
    }
}

/// `max(η_min, η0·γ^n)`.
pub fn exploration_noise(n: u64, s: &ExplorationSchedule) -> f64 {
    (s.eta0 * s.gamma_exp.powf(n as f64)).max(s.eta_min)
}

/// What survives of the replay buffer when moving to the next stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationPolicy {
    /// Keep transitions with reward at least this value.
    Threshold(f64),
    Retain,
    Discard,
}

impl Default for MigrationPolicy {
    fn default() -> Self {
        MigrationPolicy::Threshold(0.0)
    }
}

impl MigrationPolicy {
    pub fn delta(self) -> f64 {
        match self {
            MigrationPolicy::Threshold(d) => d,
            MigrationPolicy::Retain => f64::NEG_INFINITY,
            MigrationPolicy::Discard => f64::INFINITY,
        }
    }
}
