use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::math::{exp, sqrt};
use crate::nn::{clip_grad_norm, Adam, AblationMask, PolicyNetwork};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const LOG_STD_BOUNDS: (f64, f64) = (-5.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub rollout_horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    pub checkpoint_every: u64,
    pub total_steps: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            rollout_horizon: 2048,
            epochs: 4,
            minibatch: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            learning_rate: 3e-4,
            reward_scale: 0.01,
            max_grad_norm: 0.5,
            checkpoint_every: 50_000,
            total_steps: 200_000,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = self.clip_eps > 0.0
            && self.clip_eps < 1.0
            && self.rollout_horizon >= self.minibatch
            && self.minibatch > 0
            && self.epochs > 0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.learning_rate > 0.0
            && self.reward_scale > 0.0
            && self.checkpoint_every > 0;
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidConfig("ppo"))
        }
    }
}

/// One collected decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub obs: Vec<f64>,
    /// Pre-clipping Gaussian sample.
    pub action: [f64; 2],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub terminal: bool,
    /// Episode ended here for any reason.
    pub done: bool,
    /// Value of the successor state (0 at terminals).
    pub next_value: f64,
}

/// Generalized advantage estimates and returns. `next_values[t]` is the
/// value of the state reached after step `t`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminals: &[bool],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let bootstrap = if terminals[t] { 0.0 } else { next_values[t] };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        let carry = if dones[t] { 0.0 } else { gamma * lambda * running };
        running = delta + carry;
        adv[t] = running;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// `min(ρA, clip(ρ, 1-ε, 1+ε)A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of the clipped surrogate w.r.t. the new log-probability.
pub fn surrogate_grad_log_prob(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / exp(*ls);
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Clipped-surrogate update over `epochs` shuffled passes of the rollout.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNetwork,
    adam: &mut Adam,
    rollout: &[RolloutStep],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoLosses, AgentError> {
    if rollout.is_empty() {
        return Ok(PpoLosses::default());
    }
    let log_std_off = net.log_std.ok_or(AgentError::WrongHead)?;
    let dim = net.action_dim();
    let rewards: Vec<f64> = rollout.iter().map(|s| s.reward).collect();
    let values: Vec<f64> = rollout.iter().map(|s| s.value).collect();
    let next_values: Vec<f64> = rollout.iter().map(|s| s.next_value).collect();
    let terminals: Vec<bool> = rollout.iter().map(|s| s.terminal).collect();
    let dones: Vec<bool> = rollout.iter().map(|s| s.done).collect();
    let (mut adv, returns) = gae(&rewards, &values, &next_values, &terminals, &dones, cfg.gamma, cfg.gae_lambda);
    if adv.iter().chain(&returns).any(|a| !a.is_finite()) {
        return Err(AgentError::NonFiniteAdvantage);
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = sqrt(adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));

    let mut order: Vec<usize> = (0..rollout.len()).collect();
    let mut losses = PpoLosses::default();
    let mut batches = 0usize;
    let mut upstream = vec![0.0; net.output_len()];
    for _ in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.minibatch) {
            let inv_b = 1.0 / chunk.len() as f64;
            let mut grads = vec![0.0; net.params.len()];
            let log_std: Vec<f64> = net.log_std().to_vec();
            let mut pl = 0.0;
            let mut vl = 0.0;
            for &k in chunk {
                let s = &rollout[k];
                let cache = net.forward_cached(&s.obs, AblationMask::NONE)?;
                let mu = &cache.output[..dim];
                let v = cache.output[dim];
                let lp = gaussian_log_prob(&s.action, mu, &log_std);
                let ratio = exp(lp - s.log_prob);
                pl -= clipped_surrogate(ratio, adv[k], cfg.clip_eps) * inv_b;
                vl += (v - returns[k]) * (v - returns[k]) * inv_b;
                // loss = -surrogate, so dL/dlogp = -dS/dlogp
                let dlp = -surrogate_grad_log_prob(ratio, adv[k], cfg.clip_eps) * inv_b;
                for i in 0..dim {
                    let var = exp(2.0 * log_std[i]);
                    let diff = s.action[i] - mu[i];
                    upstream[i] = dlp * diff / var;
                    grads[log_std_off + i] += dlp * (diff * diff / var - 1.0);
                }
                upstream[dim] = 2.0 * cfg.value_coef * (v - returns[k]) * inv_b;
                net.backward(&cache, &upstream, &mut grads)?;
            }
            // entropy = Σ log σ + const, maximized
            for i in 0..dim {
                grads[log_std_off + i] -= cfg.entropy_coef;
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(AgentError::NonFiniteAdvantage);
            }
            if cfg.max_grad_norm > 0.0 {
                clip_grad_norm(&mut grads, cfg.max_grad_norm);
            }
            adam.step(&mut net.params, &grads);
            for v in &mut net.params[log_std_off..log_std_off + dim] {
                *v = v.clamp(LOG_STD_BOUNDS.0, LOG_STD_BOUNDS.1);
            }
            losses.policy += pl;
            losses.value += vl;
            losses.entropy += log_std.iter().map(|l| l + 0.5 + HALF_LN_2PI).sum::<f64>();
            batches += 1;
        }
    }
    let b = batches.max(1) as f64;
    Ok(PpoLosses {
        policy: losses.policy / b,
        value: losses.value / b,
        entropy: losses.entropy / b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_gae_is_td_error() {
        for lambda in [0.0, 0.5, 0.95, 1.0] {
            let (a, r) = gae(&[1.5], &[0.3], &[2.0], &[false], &[false], 0.99, lambda);
            let delta = 1.5 + 0.99 * 2.0 - 0.3;
            assert!((a[0] - delta).abs() < 1e-12);
            assert!((r[0] - (delta + 0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_resets_across_episodes() {
        let (a, _) = gae(&[1.0, 5.0], &[0.0, 0.0], &[0.0, 0.0], &[true, true], &[true, true], 0.9, 0.9);
        assert_eq!(a, vec![1.0, 5.0]);
    }

    #[test]
    fn clip_arithmetic() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_eq!(surrogate_grad_log_prob(1.5, 1.0, 0.2), 0.0);
    }

    #[test]
    fn unit_ratio_is_vanilla_gradient() {
        for a in [-2.0, -0.1, 0.7, 3.0] {
            assert_eq!(surrogate_grad_log_prob(1.0, a, 0.2), a);
        }
    }

    #[test]
    fn standard_normal_density() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + HALF_LN_2PI).abs() < 1e-15);
    }
}
