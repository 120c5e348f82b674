//! Greedy evaluation on the shared episode set.

use alloc::vec::Vec;

use super::nav::{Action, NavEnv, NavSettings, TrajectoryRow};
use super::AgentError;
use crate::envgen::{generate, EnvConfig};
use crate::latency::LatencyModel;
use crate::nn::{argmax, AblationMask, OutputSpec, PolicyNetwork};
use crate::qof::EpisodeRecord;
use crate::rng::{self, tag};

/// Deterministic action: arg-max Q for discrete heads, the mean for
/// Gaussian ones.
pub fn greedy_action(net: &PolicyNetwork, obs: &[f64], mask: AblationMask) -> Result<Action, AgentError> {
    let out = net.forward(obs, mask)?;
    Ok(match net.output {
        OutputSpec::Discrete { .. } => Action::Discrete(argmax(&out)),
        OutputSpec::Gaussian { .. } => Action::Continuous([out[0], out[1]]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub latency: LatencyModel,
    /// Keys the per-decision latency draws.
    pub latency_seed: u64,
    pub mask: AblationMask,
    pub record_trajectories: bool,
}

impl EvalOptions {
    pub fn zero_latency(t3: f64) -> Self {
        EvalOptions {
            latency: LatencyModel::zero(t3),
            latency_seed: 0,
            mask: AblationMask::NONE,
            record_trajectories: false,
        }
    }
}

/// Flies one episode with the greedy policy.
pub fn run_episode(
    net: &PolicyNetwork,
    settings: &NavSettings,
    env: &EnvConfig,
    episode_index: u64,
    opts: &EvalOptions,
) -> Result<(EpisodeRecord, Option<Vec<TrajectoryRow>>), AgentError> {
    if net.input.n_rays != settings.dynamics.n_rays {
        return Err(AgentError::TemplateMismatch);
    }
    let instance = generate(env, episode_index, None)?;
    let mut nav = NavEnv::new(settings, instance, opts.record_trajectories);
    let mut lat_rng = rng::stream(opts.latency_seed, episode_index, tag::LATENCY);
    while !nav.is_done() {
        let action = greedy_action(net, nav.observation(), opts.mask)?;
        let lat = opts.latency.sample(&mut lat_rng);
        nav.step(action, &lat)?;
    }
    let traj = nav.take_trajectory();
    Ok((nav.record(), traj))
}

pub fn evaluate(
    net: &PolicyNetwork,
    settings: &NavSettings,
    env: &EnvConfig,
    episodes: &[u64],
    opts: &EvalOptions,
) -> Result<Vec<EpisodeRecord>, AgentError> {
    episodes
        .iter()
        .map(|&e| run_episode(net, settings, env, e, opts).map(|(r, _)| r))
        .collect()
}
