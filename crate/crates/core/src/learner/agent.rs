use nalgebra::{DMatrix, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{Activation, Adam, Grads, Mlp};
use super::{LearnerError, Transition};
use crate::trig::axis_angle;

pub const STATE_DIM: usize = 6;
pub const GOAL_DIM: usize = 2;
pub const ACTION_DIM: usize = 3;
const OBS_DIM: usize = STATE_DIM + GOAL_DIM;

/// Fixed affine scaling of `(s, g)` before the networks:
/// `(value - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub offset: [f64; OBS_DIM],
    pub scale: [f64; OBS_DIM],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            offset: [1.6, 0.0, 0.25, 3.5, 0.0, 0.0, -0.7, 0.0],
            scale: [1.0, 0.5, 0.15, 1.5, 1.0, 1.5, 0.3, 0.5],
        }
    }
}

impl Normalizer {
    fn apply(&self, s: &[f64; STATE_DIM], g: &[f64; GOAL_DIM], out: &mut [f64]) {
        for (k, v) in s.iter().chain(g).enumerate() {
            out[k] = (v - self.offset[k]) / self.scale[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Soft target-update rate.
    pub tau: f64,
    /// Discount for the optional bootstrap term.
    pub gamma_disc: f64,
    /// Add `γ·Q'(s', μ'(s'))` to the critic target. Off: every episode ends
    /// at the landing, so the target is the reward alone.
    pub bootstrap: bool,
    /// Racket orientation for a zero action, `[w, x, y, z]`.
    pub base_quaternion: [f64; 4],
    /// Rotation for a unit action component, degrees.
    pub max_rotation_deg: f64,
    /// Weight of the squared actor pre-activations subtracted from the actor
    /// objective. Keeps the tanh output away from saturation, where its
    /// gradient vanishes and the policy can no longer move.
    pub preactivation_penalty: f64,
    pub normalizer: Normalizer,
}

/// Orientation whose face normal (local +z) points back over the table,
/// tilted up by `elevation_deg`.
pub fn facing_back(elevation_deg: f64) -> UnitQuaternion<f64> {
    // a turn about y by e - 90 deg takes +z to (-cos e, 0, sin e)
    axis_angle(&Vector3::y_axis(), elevation_deg.to_radians() - std::f64::consts::FRAC_PI_2)
}

impl Default for AgentConfig {
    fn default() -> Self {
        let q = facing_back(10.0);
        Self {
            hidden: vec![128, 128],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 10_000,
            tau: 0.005,
            gamma_disc: 0.99,
            bootstrap: false,
            base_quaternion: [q.w, q.i, q.j, q.k],
            max_rotation_deg: 15.0,
            preactivation_penalty: 0.0,
            normalizer: Normalizer::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.into()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be non-empty and positive");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch size and buffer capacity must be positive");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        let q = self.base_quaternion;
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return bad("base quaternion must have unit norm");
        }
        if !(self.max_rotation_deg > 0.0 && self.max_rotation_deg <= 180.0) {
            return bad("max rotation must be in (0, 180] degrees");
        }
        if !(self.preactivation_penalty >= 0.0 && self.preactivation_penalty.is_finite()) {
            return bad("pre-activation penalty must be finite and non-negative");
        }
        if self.normalizer.scale.iter().any(|s| !(s.abs() > 0.0)) {
            return bad("normalizer scales must be non-zero");
        }
        Ok(())
    }

    pub fn base(&self) -> UnitQuaternion<f64> {
        let [w, i, j, k] = self.base_quaternion;
        UnitQuaternion::new_normalize(nalgebra::Quaternion::new(w, i, j, k))
    }
}

/// Euler increments of `max_rotation · a`, applied about the racket's own
/// x, then y, then z axes, after the base orientation.
pub fn action_to_quaternion(a: &[f64; ACTION_DIM], base: &UnitQuaternion<f64>, max_rotation_deg: f64) -> UnitQuaternion<f64> {
    let k = max_rotation_deg.to_radians();
    let rx = axis_angle(&Vector3::x_axis(), k * a[0]);
    let ry = axis_angle(&Vector3::y_axis(), k * a[1]);
    let rz = axis_angle(&Vector3::z_axis(), k * a[2]);
    let mut q = base * rx * ry * rz;
    q.renormalize();
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean critic value of the actor's actions.
    pub actor_objective: f64,
}

/// Actor, critic, their target copies and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub cfg: AgentConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub rng: ChaCha8Rng,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

/// Observation columns `(s, g)` for a batch.
fn observations(batch: &[Transition], norm: &Normalizer) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(OBS_DIM, batch.len());
    for (c, t) in batch.iter().enumerate() {
        norm.apply(&t.s, &t.g, m.column_mut(c).as_mut_slice());
    }
    m
}

fn stack(obs: &DMatrix<f64>, actions: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(obs.nrows() + actions.nrows(), obs.ncols());
    m.rows_mut(0, obs.nrows()).copy_from(obs);
    m.rows_mut(obs.nrows(), actions.nrows()).copy_from(actions);
    m
}

fn actions(batch: &[Transition]) -> DMatrix<f64> {
    DMatrix::from_fn(ACTION_DIM, batch.len(), |r, c| batch[c].a[r])
}

/// Mean squared error of the critic against `targets`.
pub fn critic_loss(critic: &Mlp, obs: &DMatrix<f64>, actions: &DMatrix<f64>, targets: &[f64]) -> f64 {
    let q = critic.forward(&stack(obs, actions));
    q.iter().zip(targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / targets.len() as f64
}

pub fn critic_loss_grad(critic: &Mlp, obs: &DMatrix<f64>, actions: &DMatrix<f64>, targets: &[f64]) -> (f64, Grads) {
    let tr = critic.forward_trace(&stack(obs, actions));
    let n = targets.len() as f64;
    let diff = DMatrix::from_fn(1, targets.len(), |_, c| tr.output()[(0, c)] - targets[c]);
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let (g, _) = critic.backward(&tr, &(diff * (2.0 / n)));
    (loss, g)
}

/// Mean `Q(s, g, μ(s, g))` minus `penalty` times the mean squared actor
/// pre-activation norm.
pub fn actor_objective(actor: &Mlp, critic: &Mlp, obs: &DMatrix<f64>, penalty: f64) -> f64 {
    let ta = actor.forward_trace(obs);
    let q = critic.forward(&stack(obs, ta.output())).mean();
    q - penalty * ta.pre_output().norm_squared() / obs.ncols() as f64
}

/// Gradient of [`actor_objective`] with respect to the actor's parameters,
/// with the mean critic value.
pub fn actor_objective_grad(actor: &Mlp, critic: &Mlp, obs: &DMatrix<f64>, penalty: f64) -> (f64, Grads) {
    debug_assert_eq!(actor.output, Activation::Tanh);
    let ta = actor.forward_trace(obs);
    let tc = critic.forward_trace(&stack(obs, ta.output()));
    let n = obs.ncols() as f64;
    let (_, d_in) = critic.backward(&tc, &DMatrix::from_element(1, obs.ncols(), 1.0 / n));
    let d_action = d_in.rows(OBS_DIM, ACTION_DIM).into_owned();
    let mut delta = d_action.component_mul(&ta.output().map(|y| 1.0 - y * y));
    delta -= ta.pre_output() * (2.0 * penalty / n);
    let (g, _) = actor.backward_pre(&ta, delta);
    (tc.output().mean(), g)
}

fn negate(g: &mut Grads) {
    for l in g {
        l.w.neg_mut();
        l.b.neg_mut();
    }
}

impl Agent {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self, LearnerError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::new(&layer_sizes(OBS_DIM, &cfg.hidden, ACTION_DIM), Activation::Tanh, 3e-3, &mut rng);
        let critic = Mlp::new(
            &layer_sizes(OBS_DIM + ACTION_DIM, &cfg.hidden, 1),
            Activation::Identity,
            3e-3,
            &mut rng,
        );
        Ok(Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            cfg,
            rng,
        })
    }

    fn obs_one(&self, s: &[f64; STATE_DIM], g: &[f64; GOAL_DIM]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(OBS_DIM, 1);
        self.cfg.normalizer.apply(s, g, m.as_mut_slice());
        m
    }

    /// Deterministic action.
    pub fn policy(&self, s: &[f64; STATE_DIM], g: &[f64; GOAL_DIM]) -> [f64; ACTION_DIM] {
        let out = self.actor.forward(&self.obs_one(s, g));
        [out[0], out[1], out[2]]
    }

    /// Policy action plus Gaussian noise of standard deviation `eta`, clipped
    /// to `[-1, 1]`, and the racket orientation it maps to.
    pub fn act(&mut self, s: &[f64; STATE_DIM], g: &[f64; GOAL_DIM], eta: f64) -> ([f64; ACTION_DIM], UnitQuaternion<f64>) {
        let mut a = self.policy(s, g);
        if eta > 0.0 {
            let noise = Normal::new(0.0, eta).expect("finite positive std");
            for v in &mut a {
                *v += noise.sample(&mut self.rng);
            }
        }
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        (a, self.orientation(&a))
    }

    /// Copy whose actor is the slowly tracking target actor. Its greedy
    /// policy jitters less between updates than the online one.
    pub fn averaged(&self) -> Agent {
        Agent {
            actor: self.actor_target.clone(),
            ..self.clone()
        }
    }

    pub fn orientation(&self, a: &[f64; ACTION_DIM]) -> UnitQuaternion<f64> {
        action_to_quaternion(a, &self.cfg.base(), self.cfg.max_rotation_deg)
    }

    fn targets(&self, batch: &[Transition]) -> Vec<f64> {
        if !self.cfg.bootstrap {
            return batch.iter().map(|t| t.r).collect();
        }
        let mut next = DMatrix::zeros(OBS_DIM, batch.len());
        for (c, t) in batch.iter().enumerate() {
            self.cfg.normalizer.apply(&t.s_next, &t.g, next.column_mut(c).as_mut_slice());
        }
        let a = self.actor_target.forward(&next);
        let q = self.critic_target.forward(&stack(&next, &a));
        batch.iter().zip(q.iter()).map(|(t, q)| t.r + self.cfg.gamma_disc * q).collect()
    }

    /// One critic step on the squared error, one actor step up the critic,
    /// then soft target updates.
    pub fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::InvalidConfig("empty minibatch".into()));
        }
        let obs = observations(batch, &self.cfg.normalizer);
        let targets = self.targets(batch);
        let (critic_loss, g) = critic_loss_grad(&self.critic, &obs, &actions(batch), &targets);
        if !critic_loss.is_finite() {
            return Err(self.diverged(critic_loss));
        }
        self.critic_opt.apply(&mut self.critic, &g);

        let (actor_objective, mut g) =
            actor_objective_grad(&self.actor, &self.critic, &obs, self.cfg.preactivation_penalty);
        negate(&mut g);
        self.actor_opt.apply(&mut self.actor, &g);
        if !self.actor.is_finite() || !self.critic.is_finite() {
            return Err(self.diverged(critic_loss));
        }

        self.actor_target.soft_update(&self.actor, self.cfg.tau);
        self.critic_target.soft_update(&self.critic, self.cfg.tau);
        Ok(UpdateStats {
            critic_loss,
            actor_objective,
        })
    }

    fn diverged(&self, loss: f64) -> LearnerError {
        LearnerError::Diverged(format!(
            "critic loss {loss} after {} critic steps; actor finite: {}, critic finite: {}",
            self.critic_opt.step,
            self.actor.is_finite(),
            self.critic.is_finite()
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3};
    use rand::Rng;

    fn small() -> AgentConfig {
        AgentConfig {
            hidden: vec![2, 2],
            ..Default::default()
        }
    }

    fn batch(n: usize, seed: u64) -> Vec<Transition> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| Transition {
                s: [
                    1.6,
                    rng.random_range(-0.4..0.4),
                    rng.random_range(0.1..0.4),
                    rng.random_range(2.0..5.0),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-1.0..1.0),
                ],
                g: [rng.random_range(-1.0..-0.4), rng.random_range(-0.5..0.5)],
                a: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                r: rng.random_range(-1.0..3.0),
                s_next: [0.0; 6],
                n: i as u64,
                stage: 3.0,
            })
            .collect()
    }

    #[test]
    fn zero_action_is_base() {
        let cfg = AgentConfig::default();
        let q = action_to_quaternion(&[0.0; 3], &cfg.base(), 15.0);
        assert!(q.angle_to(&cfg.base()) < 1e-12);
    }

    #[test]
    fn full_x_action_rotates_fifteen_degrees() {
        let base = facing_back(10.0);
        let q = action_to_quaternion(&[1.0, 0.0, 0.0], &base, 15.0);
        let inc = base.inverse() * q;
        assert!((inc.angle() - 15f64.to_radians()).abs() < 1e-12);
        assert!((inc.axis().unwrap().into_inner() - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn composed_action_matches_rotation_matrices() {
        let base = facing_back(10.0);
        let q = action_to_quaternion(&[1.0, 1.0, 0.0], &base, 15.0);
        let t = 15f64.to_radians();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, t.cos(), -t.sin(), 0.0, t.sin(), t.cos());
        let ry = Matrix3::new(t.cos(), 0.0, t.sin(), 0.0, 1.0, 0.0, -t.sin(), 0.0, t.cos());
        let expect = base.to_rotation_matrix().into_inner() * rx * ry;
        let got = q.to_rotation_matrix().into_inner();
        assert!((got - expect).abs().max() < 1e-9);
        let r = Rotation3::from_matrix(&expect);
        assert!(UnitQuaternion::from_rotation_matrix(&r).angle_to(&q) < 1e-9);
    }

    #[test]
    fn targets_start_equal_to_networks() {
        let a = Agent::new(AgentConfig::default(), 1).unwrap();
        assert_eq!(a.actor, a.actor_target);
        assert_eq!(a.critic, a.critic_target);
    }

    #[test]
    fn actions_bounded_and_quaternion_unit() {
        let mut a = Agent::new(small(), 2).unwrap();
        for t in batch(50, 3) {
            let (act, q) = a.act(&t.s, &t.g, 2.0);
            assert!(act.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!((q.quaternion().norm() - 1.0).abs() < 1e-12);
            let inc = a.cfg.base().inverse() * q;
            assert!(inc.angle() <= 45f64.to_radians() + 1e-9);
        }
    }

    #[test]
    fn critic_at_fixed_point_has_zero_loss() {
        let a = Agent::new(small(), 4).unwrap();
        let mut b = batch(16, 5);
        let obs = observations(&b, &a.cfg.normalizer);
        let q = a.critic.forward(&stack(&obs, &actions(&b)));
        for (t, q) in b.iter_mut().zip(q.iter()) {
            t.r = *q;
        }
        let targets: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(critic_loss(&a.critic, &obs, &actions(&b), &targets), 0.0);
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..5 {
            // random weights and biases keep ReLU inputs away from exact zeros
            let mut agent = Agent::new(small(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            for net in [&mut agent.actor, &mut agent.critic] {
                let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
                net.set_params(&p);
            }
            let b = batch(8, 100 + seed);
            let obs = observations(&b, &agent.cfg.normalizer);
            let acts = actions(&b);
            let y: Vec<f64> = b.iter().map(|t| t.r).collect();

            let (_, g) = critic_loss_grad(&agent.critic, &obs, &acts, &y);
            let p = agent.critic.params();
            let fd: Vec<f64> = (0..p.len())
                .map(|k| {
                    let mut net = agent.critic.clone();
                    let mut q = p.clone();
                    q[k] += h;
                    net.set_params(&q);
                    let up = critic_loss(&net, &obs, &acts, &y);
                    q[k] -= 2.0 * h;
                    net.set_params(&q);
                    (up - critic_loss(&net, &obs, &acts, &y)) / (2.0 * h)
                })
                .collect();
            assert!(max_rel_err(&super::super::nn::flatten(&g), &fd) < 1e-4);

            let pen = 0.05;
            let (_, g) = actor_objective_grad(&agent.actor, &agent.critic, &obs, pen);
            let p = agent.actor.params();
            let fd: Vec<f64> = (0..p.len())
                .map(|k| {
                    let mut net = agent.actor.clone();
                    let mut q = p.clone();
                    q[k] += h;
                    net.set_params(&q);
                    let up = actor_objective(&net, &agent.critic, &obs, pen);
                    q[k] -= 2.0 * h;
                    net.set_params(&q);
                    (up - actor_objective(&net, &agent.critic, &obs, pen)) / (2.0 * h)
                })
                .collect();
            assert!(max_rel_err(&super::super::nn::flatten(&g), &fd) < 1e-4);
        }
    }

    #[test]
    fn updates_reduce_critic_error() {
        let mut a = Agent::new(AgentConfig::default(), 6).unwrap();
        let b = batch(64, 7);
        let first = a.update(&b).unwrap().critic_loss;
        let mut last = first;
        for _ in 0..200 {
            last = a.update(&b).unwrap().critic_loss;
        }
        assert!(last < 0.2 * first, "{first} -> {last}");
        assert_ne!(a.actor, a.actor_target);
        assert!(a.update(&[]).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut c = AgentConfig::default();
        c.base_quaternion = [1.0, 1.0, 0.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = AgentConfig::default();
        c.hidden = vec![];
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<AgentConfig>(r#"{"hiden":[4]}"#).is_err());
    }
}
