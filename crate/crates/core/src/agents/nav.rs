//! Episode runner tying the generated world, kinematics, latency, power model
//! and reward together.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::reward::{compute_reward, RewardParams};
use crate::dynamics::{
    decision_step, observe, ActionError, ActionMapping, DynamicsParams, TerminalEvent, VelocityCommand, WorldState,
};
use crate::energy::{instantaneous_power, EnergyCoefficients, EnergyState};
use crate::envgen::EnvironmentInstance;
use crate::latency::LatencySample;
use crate::qof::{EpisodeRecord, Outcome};

/// First episode index of the shared evaluation set. Training uses indices
/// counted from zero, so the two never overlap.
pub const EVAL_EPISODE_BASE: u64 = 1 << 40;

/// First episode index used for checkpoint selection during training.
pub const VALIDATION_EPISODE_BASE: u64 = 1 << 41;

/// Episode indices of an `n`-episode evaluation.
pub fn eval_episode_indices(n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| EVAL_EPISODE_BASE + i).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NavSettings {
    pub dynamics: DynamicsParams,
    pub energy: EnergyCoefficients,
    pub mapping: ActionMapping,
}

impl NavSettings {
    pub fn reward_params(&self) -> RewardParams {
        RewardParams::new(self.mapping.max_speed(), self.dynamics.t3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    /// Body-frame command in `[-1, 1]^2`.
    Continuous([f64; 2]),
}

/// One physics substep of a logged flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    /// Discrete id, or -1 for continuous actions and the initial row.
    pub action_id: i64,
    pub power_w: f64,
    /// Cumulative.
    pub energy_j: f64,
    pub event: Option<TerminalEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
    pub outcome: Option<Outcome>,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub struct NavEnv {
    settings: NavSettings,
    reward: RewardParams,
    instance: EnvironmentInstance,
    state: WorldState,
    energy: EnergyState,
    prev_cmd: VelocityCommand,
    prev_goal_distance: f64,
    distance: f64,
    latency_sum: f64,
    outcome: Option<Outcome>,
    obs: Vec<f64>,
    trajectory: Option<Vec<TrajectoryRow>>,
}

impl NavEnv {
    pub fn new(settings: &NavSettings, instance: EnvironmentInstance, record_trajectory: bool) -> Self {
        let state = WorldState::initial(&instance);
        let obs = observe(&state, &instance, &settings.dynamics).to_input();
        let energy = EnergyState::with_capacity(instance.config.battery_capacity);
        let trajectory = record_trajectory.then(|| {
            vec![TrajectoryRow {
                t: 0.0,
                x: state.position[0],
                y: state.position[1],
                yaw: state.yaw,
                vx: 0.0,
                vy: 0.0,
                action_id: -1,
                power_w: 0.0,
                energy_j: 0.0,
                event: None,
            }]
        });
        NavEnv {
            reward: settings.reward_params(),
            settings: settings.clone(),
            prev_cmd: VelocityCommand::hover(settings.dynamics.t3),
            prev_goal_distance: state.xy().distance(instance.goal_xy()),
            instance,
            state,
            energy,
            distance: 0.0,
            latency_sum: 0.0,
            outcome: None,
            obs,
            trajectory,
        }
    }

    /// Flattened observation at the current state.
    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn instance(&self) -> &EnvironmentInstance {
        &self.instance
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn trajectory(&self) -> Option<&[TrajectoryRow]> {
        self.trajectory.as_deref()
    }

    pub fn take_trajectory(&mut self) -> Option<Vec<TrajectoryRow>> {
        self.trajectory.take()
    }

    /// Executes one decision: the previous command runs stale for
    /// `t1 + t2`, then `action` runs for `t3`.
    pub fn step(&mut self, action: Action, latency: &LatencySample) -> Result<StepResult, ActionError> {
        let yaw = self.state.yaw;
        let t3 = latency.t3;
        let (cmd, action_id) = match action {
            Action::Discrete(id) => (self.settings.mapping.discrete(id, yaw, t3)?, id as i64),
            Action::Continuous(a) => (self.settings.mapping.continuous(a, yaw, t3), -1),
        };
        let out = decision_step(
            &self.state,
            &mut self.instance,
            &self.prev_cmd,
            &cmd,
            latency,
            &self.settings.dynamics,
        );
        let mut events = out.events;
        let coeffs = &self.settings.energy;
        for s in &out.motion_samples {
            let p = instantaneous_power(s.v_xy, s.a_xy, 0.0, 0.0, coeffs);
            self.energy.accumulate(p, s.dt, coeffs);
            self.distance += s.path;
            if let Some(rows) = self.trajectory.as_mut() {
                rows.push(TrajectoryRow {
                    t: s.end_time,
                    x: s.end_position.x,
                    y: s.end_position.y,
                    yaw: s.end_yaw,
                    vx: s.end_velocity.x,
                    vy: s.end_velocity.y,
                    action_id,
                    power_w: p,
                    energy_j: self.energy.energy_joules,
                    event: None,
                });
            }
        }
        if self.energy.exhausted {
            events.battery_exhausted = true;
        }
        self.state = out.new_state;
        self.prev_cmd = cmd;
        self.latency_sum += latency.stale();

        let primary = events.primary();
        let goal_distance = self.state.xy().distance(self.instance.goal_xy());
        let speed = self.state.speed().min(self.reward.v_max);
        let reward = compute_reward(
            primary == Some(TerminalEvent::GoalReached),
            events.collision,
            goal_distance,
            self.prev_goal_distance,
            speed,
            &self.reward,
        );
        self.prev_goal_distance = goal_distance;
        self.obs = observe(&self.state, &self.instance, &self.settings.dynamics).to_input();

        let outcome = primary.map(|e| match e {
            TerminalEvent::Collision => Outcome::Collision,
            TerminalEvent::BatteryExhausted => Outcome::BatteryExhausted,
            TerminalEvent::GoalReached => Outcome::Success,
            TerminalEvent::StepBudgetExhausted => Outcome::StepExhausted,
        });
        if let (Some(rows), Some(e)) = (self.trajectory.as_mut(), primary) {
            if let Some(last) = rows.last_mut() {
                last.event = Some(e);
            }
        }
        self.outcome = outcome;
        Ok(StepResult {
            reward,
            terminal: matches!(
                primary,
                Some(TerminalEvent::Collision | TerminalEvent::GoalReached | TerminalEvent::BatteryExhausted)
            ),
            truncated: primary == Some(TerminalEvent::StepBudgetExhausted),
            outcome,
        })
    }

    /// Summary of the episode so far.
    pub fn record(&self) -> EpisodeRecord {
        let steps = self.state.decision_steps_taken;
        EpisodeRecord {
            episode_index: self.instance.episode_index,
            outcome: self.outcome.unwrap_or(Outcome::StepExhausted),
            flight_time: self.state.sim_time,
            distance_flown: self.distance,
            straight_line: (self.instance.start_xy().distance(self.instance.goal_xy()) - self.instance.config.goal_radius)
                .max(0.0),
            energy_kj: self.energy.energy_kj(),
            steps,
            mean_latency_ms: if steps == 0 {
                0.0
            } else {
                self.latency_sum / steps as f64 * 1000.0
            },
            trajectory: None,
        }
    }
}
