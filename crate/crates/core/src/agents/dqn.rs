use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::replay::Transition;
use super::AgentError;
use crate::nn::{clip_grad_norm, Adam, AblationMask, PolicyNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub learn_start: u64,
    pub checkpoint_every: u64,
    pub total_steps: u64,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    pub learning_rate: f64,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    pub huber_delta: f64,
    /// 0 disables clipping.
    pub max_grad_norm: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            replay_capacity: 50_000,
            batch_size: 32,
            target_sync_every: 1_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 30_000,
            learn_start: 1_000,
            checkpoint_every: 50_000,
            total_steps: 200_000,
            train_every: 4,
            learning_rate: 5e-4,
            reward_scale: 0.01,
            huber_delta: 1.0,
            max_grad_norm: 10.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = self.gamma > 0.0
            && self.gamma <= 1.0
            && self.replay_capacity > 0
            && self.batch_size > 0
            && self.target_sync_every > 0
            && (0.0..=1.0).contains(&self.epsilon_start)
            && (0.0..=1.0).contains(&self.epsilon_end)
            && self.checkpoint_every > 0
            && self.train_every > 0
            && self.learning_rate > 0.0
            && self.reward_scale > 0.0
            && self.huber_delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidConfig("dqn"))
        }
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`.
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let f = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }
}

/// Bellman target: `r` at terminal transitions, otherwise
/// `r + gamma * max_a Q_target(s', a)`.
pub fn td_target(reward: f64, terminal: bool, gamma: f64, max_next_q: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * max_next_q
    }
}

fn huber(e: f64, delta: f64) -> (f64, f64) {
    if e.abs() <= delta {
        (0.5 * e * e, e)
    } else {
        (delta * (e.abs() - 0.5 * delta), delta * e.signum())
    }
}

/// Mean Huber loss over the batch and its gradient w.r.t. `net.params`.
pub fn dqn_loss_and_grad(
    net: &PolicyNetwork,
    target: &PolicyNetwork,
    batch: &[&Transition],
    gamma: f64,
    huber_delta: f64,
) -> Result<(f64, Vec<f64>), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::ReplayNotReady);
    }
    let mut grads = vec![0.0; net.params.len()];
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut upstream = vec![0.0; net.output_len()];
    for t in batch {
        let max_next = if t.terminal {
            0.0
        } else {
            target
                .forward(&t.next_obs, AblationMask::NONE)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let y = td_target(t.reward, t.terminal, gamma, max_next);
        let cache = net.forward_cached(&t.obs, AblationMask::NONE)?;
        let q = *cache.output.get(t.action).ok_or(AgentError::ActionOutOfRange(t.action))?;
        let (l, dl) = huber(q - y, huber_delta);
        loss += l * inv_b;
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[t.action] = dl * inv_b;
        net.backward(&cache, &upstream, &mut grads)?;
    }
    Ok((loss, grads))
}

/// One Adam step on the batch; returns the loss before the step.
pub fn dqn_update(
    net: &mut PolicyNetwork,
    target: &PolicyNetwork,
    batch: &[&Transition],
    cfg: &DqnConfig,
    adam: &mut Adam,
) -> Result<f64, AgentError> {
    let (loss, mut grads) = dqn_loss_and_grad(net, target, batch, cfg.gamma, cfg.huber_delta)?;
    if cfg.max_grad_norm > 0.0 {
        clip_grad_norm(&mut grads, cfg.max_grad_norm);
    }
    adam.step(&mut net.params, &grads);
    Ok(loss)
}
