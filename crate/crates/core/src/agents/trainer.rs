//! Step-driven training loops. Every random draw comes from a stream keyed by
//! `(run seed, step or update counter, purpose)`, so a run is a pure function
//! of its setup.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::curriculum::{CurriculumState, ZoneAdvance, CURRICULUM_WINDOW};
use super::dqn::{dqn_update, DqnConfig};
use super::nav::{Action, NavEnv, NavSettings};
use super::ppo::{gaussian_log_prob, ppo_update, PpoConfig, PpoLosses, RolloutStep};
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::dynamics::NUM_DISCRETE_ACTIONS;
use crate::envgen::{generate, CurriculumZone, EnvConfig};
use crate::latency::{LatencyModel, LatencySample};
use crate::nn::{argmax, AblationMask, Adam, InputSpec, OutputSpec, PolicyNetwork, PolicyTemplate};
use crate::qof::Outcome;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub settings: NavSettings,
    pub template: PolicyTemplate,
    /// Goal zones grow with success; otherwise the whole arena is one zone.
    pub curriculum: bool,
    /// Episodes in the rolling success window.
    #[serde(default = "default_window")]
    pub curriculum_window: usize,
    /// Per-decision latency injected during training.
    pub latency: Option<LatencyModel>,
    pub seed: u64,
}

fn default_window() -> usize {
    CURRICULUM_WINDOW
}

impl TrainSetup {
    fn initial_progress(&self) -> Progress {
        Progress {
            curriculum: CurriculumState::new(self.curriculum_window),
            ..Progress::default()
        }
    }

    pub fn input_spec(&self) -> InputSpec {
        InputSpec::new(self.settings.dynamics.n_rays)
    }

    fn zone(&self, curriculum: &CurriculumState) -> Option<CurriculumZone> {
        self.curriculum
            .then(|| CurriculumZone::for_arena(curriculum.zone, self.env.arena_size[0]))
    }

    fn latency_sample(&self, step: u64) -> LatencySample {
        match &self.latency {
            Some(m) => m.sample(&mut rng::stream(self.seed, step, tag::LATENCY)),
            None => LatencySample::zero(self.settings.dynamics.t3),
        }
    }

    fn start_episode(&self, episode: u64, curriculum: &CurriculumState) -> Result<NavEnv, AgentError> {
        let instance = generate(&self.env, episode, self.zone(curriculum))?;
        Ok(NavEnv::new(&self.settings, instance, false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    /// Global step at the end of the episode.
    pub global_step: u64,
    pub steps: u32,
    /// Unscaled episodic return.
    pub reward: f64,
    pub outcome: Outcome,
    pub zone: u8,
    pub energy_kj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    Episode(EpisodeLog),
    /// `checkpoint_every` boundary reached.
    Checkpoint { step: u64 },
    /// The policy as it stands completed a curriculum zone.
    ZoneAdvanced(ZoneAdvance),
}

/// Min-max normalization over the run followed by a trailing rolling mean.
pub fn normalized_reward_curve(rewards: &[f64], window: usize) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let norm: Vec<f64> = rewards
        .iter()
        .map(|r| if span > 0.0 { (r - lo) / span } else { 0.0 })
        .collect();
    let w = window.max(1);
    let mut out = Vec::with_capacity(norm.len());
    let mut acc = 0.0;
    for i in 0..norm.len() {
        acc += norm[i];
        if i >= w {
            acc -= norm[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

/// Counters and episode state shared by both trainers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Progress {
    pub global_step: u64,
    pub episode: u64,
    pub updates: u64,
    pub curriculum: CurriculumState,
}

fn finish_episode(
    env: &NavEnv,
    progress: &mut Progress,
    setup: &TrainSetup,
    reward: f64,
    events: &mut Vec<TrainEvent>,
) {
    let rec = env.record();
    events.push(TrainEvent::Episode(EpisodeLog {
        episode: progress.episode,
        global_step: progress.global_step,
        steps: rec.steps,
        reward,
        outcome: rec.outcome,
        zone: progress.curriculum.zone,
        energy_kj: rec.energy_kj,
    }));
    if setup.curriculum {
        if let Some(adv) = progress.curriculum.record(rec.is_success()) {
            events.push(TrainEvent::ZoneAdvanced(adv));
        }
    }
    progress.episode += 1;
}

pub struct DqnTrainer {
    pub setup: TrainSetup,
    pub cfg: DqnConfig,
    pub net: PolicyNetwork,
    pub target: PolicyNetwork,
    pub adam: Adam,
    pub replay: ReplayBuffer,
    pub progress: Progress,
    env: Option<NavEnv>,
    episode_reward: f64,
}

impl DqnTrainer {
    pub fn new(setup: TrainSetup, cfg: DqnConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        setup.env.validate().map_err(|e| AgentError::Generate(crate::envgen::GenerateError::InvalidConfig(e)))?;
        let net = PolicyNetwork::build(
            setup.template,
            setup.input_spec(),
            OutputSpec::Discrete {
                actions: NUM_DISCRETE_ACTIONS,
            },
            rng::derive_seed(setup.seed, 0, tag::INIT),
        )?;
        Ok(DqnTrainer {
            target: net.clone(),
            adam: Adam::new(net.params.len(), cfg.learning_rate),
            replay: ReplayBuffer::new(cfg.replay_capacity),
            net,
            progress: setup.initial_progress(),
            setup,
            cfg,
            env: None,
            episode_reward: 0.0,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.progress.global_step >= self.cfg.total_steps
    }

    /// Restores learned state; the interrupted episode and the replay
    /// contents are not restored.
    pub fn restore(&mut self, net: PolicyNetwork, target: PolicyNetwork, adam: Adam, progress: Progress) -> Result<(), AgentError> {
        if net.template != self.net.template || net.params.len() != self.net.params.len() || target.params.len() != net.params.len() {
            return Err(AgentError::TemplateMismatch);
        }
        self.net = net;
        self.target = target;
        self.adam = adam;
        self.progress = progress;
        self.env = None;
        self.episode_reward = 0.0;
        Ok(())
    }

    /// One environment decision, plus any learning it triggers.
    pub fn step(&mut self) -> Result<Vec<TrainEvent>, AgentError> {
        let mut events = Vec::new();
        if self.env.is_none() {
            self.env = Some(self.setup.start_episode(self.progress.episode, &self.progress.curriculum)?);
            self.episode_reward = 0.0;
        }
        let step = self.progress.global_step;
        let env = self.env.as_mut().expect("episode started");
        let obs = env.observation().to_vec();
        let mut explore = rng::stream(self.setup.seed, step, tag::EXPLORE);
        let action = if explore.random::<f64>() < self.cfg.epsilon(step) {
            explore.random_range(0..NUM_DISCRETE_ACTIONS)
        } else {
            argmax(&self.net.forward(&obs, AblationMask::NONE)?)
        };
        let lat = self.setup.latency_sample(step);
        let res = env.step(Action::Discrete(action), &lat)?;
        self.episode_reward += res.reward;
        self.replay.push(Transition {
            obs,
            action,
            reward: res.reward * self.cfg.reward_scale,
            next_obs: env.observation().to_vec(),
            terminal: res.terminal,
        });
        self.progress.global_step += 1;
        let g = self.progress.global_step;

        if g >= self.cfg.learn_start && g.is_multiple_of(self.cfg.train_every) {
            let mut mb = rng::stream(self.setup.seed, self.progress.updates, tag::MINIBATCH);
            let batch = self.replay.sample(self.cfg.batch_size, &mut mb);
            dqn_update(&mut self.net, &self.target, &batch, &self.cfg, &mut self.adam)?;
            self.progress.updates += 1;
        }
        if g.is_multiple_of(self.cfg.target_sync_every) {
            self.target.params.clone_from(&self.net.params);
        }
        if res.done() {
            let env = self.env.take().expect("episode running");
            finish_episode(&env, &mut self.progress, &self.setup, self.episode_reward, &mut events);
        }
        if g.is_multiple_of(self.cfg.checkpoint_every) {
            events.push(TrainEvent::Checkpoint { step: g });
        }
        Ok(events)
    }
}

pub struct PpoTrainer {
    pub setup: TrainSetup,
    pub cfg: PpoConfig,
    pub net: PolicyNetwork,
    pub adam: Adam,
    pub progress: Progress,
    pub last_losses: PpoLosses,
    env: Option<NavEnv>,
    episode_reward: f64,
    rollout: Vec<RolloutStep>,
}

impl PpoTrainer {
    pub fn new(setup: TrainSetup, cfg: PpoConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        setup.env.validate().map_err(|e| AgentError::Generate(crate::envgen::GenerateError::InvalidConfig(e)))?;
        let net = PolicyNetwork::build(
            setup.template,
            setup.input_spec(),
            OutputSpec::Gaussian { action_dim: 2 },
            rng::derive_seed(setup.seed, 0, tag::INIT),
        )?;
        Ok(PpoTrainer {
            adam: Adam::new(net.params.len(), cfg.learning_rate),
            net,
            rollout: Vec::with_capacity(cfg.rollout_horizon),
            progress: setup.initial_progress(),
            setup,
            cfg,
            last_losses: PpoLosses::default(),
            env: None,
            episode_reward: 0.0,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.progress.global_step >= self.cfg.total_steps
    }

    pub fn restore(&mut self, net: PolicyNetwork, adam: Adam, progress: Progress) -> Result<(), AgentError> {
        if net.template != self.net.template || net.params.len() != self.net.params.len() {
            return Err(AgentError::TemplateMismatch);
        }
        self.net = net;
        self.adam = adam;
        self.progress = progress;
        self.env = None;
        self.rollout.clear();
        self.episode_reward = 0.0;
        Ok(())
    }

    fn value(&self, obs: &[f64]) -> Result<f64, AgentError> {
        Ok(self.net.forward(obs, AblationMask::NONE)?[2])
    }

    pub fn step(&mut self) -> Result<Vec<TrainEvent>, AgentError> {
        let mut events = Vec::new();
        if self.env.is_none() {
            self.env = Some(self.setup.start_episode(self.progress.episode, &self.progress.curriculum)?);
            self.episode_reward = 0.0;
        }
        let step = self.progress.global_step;
        let obs = self.env.as_ref().expect("episode started").observation().to_vec();
        let out = self.net.forward(&obs, AblationMask::NONE)?;
        let log_std = self.net.log_std().to_vec();
        let mut noise = rng::stream(self.setup.seed, step, tag::EXPLORE);
        let mut action = [0.0; 2];
        for i in 0..2 {
            let z: f64 = StandardNormal.sample(&mut noise);
            action[i] = out[i] + crate::math::exp(log_std[i]) * z;
        }
        let log_prob = gaussian_log_prob(&action, &out[..2], &log_std);
        let lat = self.setup.latency_sample(step);
        let env = self.env.as_mut().expect("episode started");
        let res = env.step(Action::Continuous(action), &lat)?;
        self.episode_reward += res.reward;
        let next_obs = env.observation().to_vec();
        self.progress.global_step += 1;
        let g = self.progress.global_step;

        if let Some(prev) = self.rollout.last_mut() {
            if !prev.done {
                prev.next_value = out[2];
            }
        }
        let full = self.rollout.len() + 1 >= self.cfg.rollout_horizon;
        let next_value = if res.terminal {
            0.0
        } else if res.truncated || full {
            self.value(&next_obs)?
        } else {
            0.0
        };
        self.rollout.push(RolloutStep {
            obs,
            action,
            log_prob,
            value: out[2],
            reward: res.reward * self.cfg.reward_scale,
            terminal: res.terminal,
            done: res.done(),
            next_value,
        });
        if res.done() {
            let env = self.env.take().expect("episode running");
            finish_episode(&env, &mut self.progress, &self.setup, self.episode_reward, &mut events);
        }
        if full {
            let mut r = rng::stream(self.setup.seed, self.progress.updates, tag::MINIBATCH);
            self.last_losses = ppo_update(&mut self.net, &mut self.adam, &self.rollout, &self.cfg, &mut r)?;
            self.rollout.clear();
            self.progress.updates += 1;
        }
        if g.is_multiple_of(self.cfg.checkpoint_every) {
            events.push(TrainEvent::Checkpoint { step: g });
        }
        Ok(events)
    }
}

/// Network template and head a checkpoint must match to be resumed.
pub fn check_template(net: &PolicyNetwork, template: PolicyTemplate, n_rays: usize) -> Result<(), AgentError> {
    if net.template != template || net.input.n_rays != n_rays {
        return Err(AgentError::TemplateMismatch);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_curve_bounds() {
        let c = normalized_reward_curve(&[-10.0, 0.0, 10.0, 10.0], 2);
        assert_eq!(c, alloc::vec![0.0, 0.25, 0.75, 1.0]);
        assert!(normalized_reward_curve(&[], 100).is_empty());
    }
}
