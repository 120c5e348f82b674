//! Planar point-mass kinematics with bounded acceleration, action semantics,
//! collision checks, ray-cast depth sensing and the latency-aware decision
//! step.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envgen::EnvironmentInstance;
use crate::latency::LatencySample;
use crate::math::{self, ceil, deg_to_rad, linspace, wrap_angle, Vec2};

pub const NUM_DISCRETE_ACTIONS: usize = 25;
/// Size of the velocity and position observation vectors.
pub const STATE_VEC_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsParams {
    /// Physics substep, s.
    pub dt_phys: f64,
    /// Acceleration bound, m/s^2.
    pub a_max: f64,
    /// Collision disc radius, m.
    pub r_agent: f64,
    pub n_rays: usize,
    pub fov_deg: f64,
    pub max_range: f64,
    /// Action application duration, s.
    pub t3: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            dt_phys: 0.02,
            a_max: 5.0,
            r_agent: 0.3,
            n_rays: 32,
            fov_deg: 90.0,
            max_range: 20.0,
            t3: 0.5,
        }
    }
}

impl DynamicsParams {
    /// Length of the flattened observation vector.
    pub fn observation_len(&self) -> usize {
        self.n_rays + 2 * STATE_VEC_LEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub position: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub sim_time: f64,
    pub decision_steps_taken: u32,
}

impl WorldState {
    pub fn initial(env: &EnvironmentInstance) -> Self {
        WorldState {
            position: env.start_position,
            yaw: env.start_yaw,
            velocity: [0.0; 3],
            sim_time: 0.0,
            decision_steps_taken: 0,
        }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }

    pub fn velocity_xy(&self) -> Vec2 {
        Vec2::new(self.velocity[0], self.velocity[1])
    }

    pub fn speed(&self) -> f64 {
        self.velocity_xy().norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum YawMode {
    /// Integrate a yaw rate in rad/s.
    Rate(f64),
    /// Face the given heading (automatic yaw for continuous actions).
    Face(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// World-frame target velocity, m/s.
    pub target_velocity: Vec2,
    pub yaw: YawMode,
    pub duration: f64,
}

impl VelocityCommand {
    pub fn hover(duration: f64) -> Self {
        VelocityCommand {
            target_velocity: Vec2::ZERO,
            yaw: YawMode::Rate(0.0),
            duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("discrete action id {0} out of range 0..25")]
    OutOfRange(usize),
}

/// Speed and yaw-rate tables behind the discrete and continuous actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionMapping {
    /// Forward speeds for ids 0..=9, m/s.
    pub forward: [f64; 10],
    /// Backward speeds for ids 10..=14, m/s.
    pub backward: [f64; 5],
    /// Yaw rates for ids 15..=19, deg/s.
    pub yaw_right: [f64; 5],
    /// Yaw rates for ids 20..=24, deg/s.
    pub yaw_left: [f64; 5],
    /// `[min, max]` speed of continuous actions, m/s.
    pub continuous: [f64; 2],
}

impl Default for ActionMapping {
    fn default() -> Self {
        ActionMapping {
            forward: linspace(1.0, 5.0),
            backward: linspace(1.0, 5.0),
            yaw_right: [108.0, 54.0, 27.0, 13.5, 6.75],
            yaw_left: [-216.0, -108.0, -54.0, -27.0, -13.5],
            continuous: [1.0, 5.0],
        }
    }
}

impl ActionMapping {
    /// Largest commanded speed of any action.
    pub fn max_speed(&self) -> f64 {
        let f = self.forward.iter().chain(&self.backward).fold(0.0f64, |m, &v| m.max(v));
        f.max(self.continuous[1])
    }

    pub fn discrete(
        &self,
        action_id: usize,
        yaw: f64,
        duration: f64,
    ) -> Result<VelocityCommand, ActionError> {
        let heading = Vec2::from_angle(yaw);
        let (v, rate_dps) = match action_id {
            0..=9 => (heading * self.forward[action_id], 0.0),
            10..=14 => (-heading * self.backward[action_id - 10], 0.0),
            15..=19 => (Vec2::ZERO, self.yaw_right[action_id - 15]),
            20..=24 => (Vec2::ZERO, self.yaw_left[action_id - 20]),
            _ => return Err(ActionError::OutOfRange(action_id)),
        };
        Ok(VelocityCommand {
            target_velocity: v,
            yaw: YawMode::Rate(deg_to_rad(rate_dps)),
            duration,
        })
    }

    /// Maps `a ∈ [-1,1]^2`, expressed in the body frame, to a velocity whose
    /// magnitude spans the continuous range; heading follows the velocity.
    /// The zero vector maps to the minimum speed along the current heading.
    pub fn continuous(&self, a: [f64; 2], yaw: f64, duration: f64) -> VelocityCommand {
        let a1 = a[0].clamp(-1.0, 1.0);
        let a2 = a[1].clamp(-1.0, 1.0);
        let body = Vec2::new(a1, a2);
        let n = body.norm();
        let dir_body = if n > 0.0 { body * (1.0 / n) } else { Vec2::new(1.0, 0.0) };
        let [lo, hi] = self.continuous;
        let mag = lo + (hi - lo) * n.min(1.0);
        let dir = dir_body.rotate(yaw);
        let v = dir * mag;
        VelocityCommand {
            target_velocity: v,
            yaw: YawMode::Face(dir.angle()),
            duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalEvent {
    Collision,
    GoalReached,
    StepBudgetExhausted,
    BatteryExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Events {
    pub collision: bool,
    pub goal_reached: bool,
    pub step_budget_exhausted: bool,
    pub battery_exhausted: bool,
}

impl Events {
    pub fn any(&self) -> bool {
        self.collision || self.goal_reached || self.step_budget_exhausted || self.battery_exhausted
    }

    pub fn merge(&mut self, o: Events) {
        self.collision |= o.collision;
        self.goal_reached |= o.goal_reached;
        self.step_budget_exhausted |= o.step_budget_exhausted;
        self.battery_exhausted |= o.battery_exhausted;
    }

    /// Collision outranks battery, which outranks reaching the goal, which
    /// outranks running out of steps.
    pub fn primary(&self) -> Option<TerminalEvent> {
        if self.collision {
            Some(TerminalEvent::Collision)
        } else if self.battery_exhausted {
            Some(TerminalEvent::BatteryExhausted)
        } else if self.goal_reached {
            Some(TerminalEvent::GoalReached)
        } else if self.step_budget_exhausted {
            Some(TerminalEvent::StepBudgetExhausted)
        } else {
            None
        }
    }
}

/// One physics substep: its length, mean planar velocity and acceleration,
/// path length and the pose and velocity at its end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    pub dt: f64,
    pub v_xy: Vec2,
    pub a_xy: Vec2,
    pub path: f64,
    pub end_time: f64,
    pub end_position: Vec2,
    pub end_yaw: f64,
    pub end_velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub new_state: WorldState,
    pub events: Events,
    pub motion_samples: Vec<MotionSample>,
}

impl StepOutcome {
    pub fn primary(&self) -> Option<TerminalEvent> {
        self.events.primary()
    }
}

/// True if the agent disc at `p` overlaps a wall or an obstacle.
pub fn in_collision(p: Vec2, env: &EnvironmentInstance, r_agent: f64) -> bool {
    let hl = env.config.half_length();
    let hw = env.config.half_width();
    if p.x.abs() + r_agent > hl || p.y.abs() + r_agent > hw {
        return true;
    }
    env.obstacles.iter().any(|o| o.distance_to_point(p) < r_agent)
}

/// Integrates `command` for `duration` seconds in fixed substeps (the last
/// one may be shorter). Stops early at the first collision or goal contact.
pub fn step_physics(
    state: &WorldState,
    env: &mut EnvironmentInstance,
    command: &VelocityCommand,
    duration: f64,
    params: &DynamicsParams,
) -> StepOutcome {
    let mut s = *state;
    let mut events = Events::default();
    let mut samples = Vec::new();
    if !(duration > 0.0) {
        return StepOutcome {
            new_state: s,
            events,
            motion_samples: samples,
        };
    }
    let n_full = ceil(duration / params.dt_phys - 1e-9).max(1.0) as usize;
    let goal = env.goal_xy();
    let target = command.target_velocity;
    let mut elapsed = 0.0;
    for i in 0..n_full {
        let h = if i + 1 == n_full {
            duration - elapsed
        } else {
            params.dt_phys
        };
        if h <= 0.0 {
            break;
        }
        let v0 = s.velocity_xy();
        let (disp, v1) = slew(v0, target, params.a_max, h);
        let p = s.xy() + disp;
        s.position[0] = p.x;
        s.position[1] = p.y;
        s.velocity[0] = v1.x;
        s.velocity[1] = v1.y;
        s.yaw = match command.yaw {
            YawMode::Rate(r) => wrap_angle(s.yaw + r * h),
            YawMode::Face(th) => wrap_angle(th),
        };
        s.sim_time += h;
        elapsed += h;
        env.advance_dynamic_obstacles(h);
        samples.push(MotionSample {
            dt: h,
            v_xy: disp * (1.0 / h),
            a_xy: (v1 - v0) * (1.0 / h),
            path: disp.norm(),
            end_time: s.sim_time,
            end_position: p,
            end_yaw: s.yaw,
            end_velocity: v1,
        });
        if in_collision(p, env, params.r_agent) {
            events.collision = true;
        }
        if p.distance(goal) <= env.config.goal_radius {
            events.goal_reached = true;
        }
        if events.any() {
            break;
        }
    }
    StepOutcome {
        new_state: s,
        events,
        motion_samples: samples,
    }
}

/// Exact constant-acceleration integration of one substep toward `target`
/// with `|a| <= a_max`. Returns `(displacement, final velocity)`.
fn slew(v0: Vec2, target: Vec2, a_max: f64, h: f64) -> (Vec2, Vec2) {
    let dv = target - v0;
    let d = dv.norm();
    if d == 0.0 {
        return (v0 * h, v0);
    }
    if a_max <= 0.0 {
        return (v0 * h, v0);
    }
    let tau = d / a_max;
    if tau <= h {
        let disp = v0 * tau + dv * (tau / 2.0) + target * (h - tau);
        (disp, target)
    } else {
        let acc = dv * (a_max / d);
        (v0 * h + acc * (h * h / 2.0), v0 + acc * h)
    }
}

/// Distance along the ray `origin + t * dir` (unit `dir`) to the box, if hit.
pub fn ray_box(origin: Vec2, dir: Vec2, lo: Vec2, hi: Vec2) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
        if d == 0.0 {
            if o < l || o > h {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (mut t0, mut t1) = ((l - o) * inv, (h - o) * inv);
            if t0 > t1 {
                core::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
        }
    }
    if t_exit < t_enter || t_exit < 0.0 {
        None
    } else {
        Some(t_enter.max(0.0))
    }
}

/// Distance from an interior point to the arena boundary along `dir`.
pub fn ray_walls(origin: Vec2, dir: Vec2, half_length: f64, half_width: f64) -> f64 {
    let mut t = f64::INFINITY;
    if dir.x > 0.0 {
        t = t.min((half_length - origin.x) / dir.x);
    } else if dir.x < 0.0 {
        t = t.min((-half_length - origin.x) / dir.x);
    }
    if dir.y > 0.0 {
        t = t.min((half_width - origin.y) / dir.y);
    } else if dir.y < 0.0 {
        t = t.min((-half_width - origin.y) / dir.y);
    }
    t.max(0.0)
}

/// Normalized ranges of `n_rays` rays spread evenly over the field of view,
/// ordered from `yaw - fov/2` to `yaw + fov/2`. 1.0 means no hit.
pub fn sense_depth(state: &WorldState, env: &EnvironmentInstance, params: &DynamicsParams) -> Vec<f64> {
    let n = params.n_rays;
    let fov = deg_to_rad(params.fov_deg);
    let origin = state.xy();
    let hl = env.config.half_length();
    let hw = env.config.half_width();
    (0..n)
        .map(|i| {
            let frac = if n > 1 { i as f64 / (n - 1) as f64 - 0.5 } else { 0.0 };
            let dir = Vec2::from_angle(state.yaw + fov * frac);
            let mut t = ray_walls(origin, dir, hl, hw);
            for o in &env.obstacles {
                if let Some(h) = ray_box(origin, dir, o.min_corner(), o.max_corner()) {
                    t = t.min(h);
                }
            }
            t.min(params.max_range) / params.max_range
        })
        .collect()
}

/// Policy input: depth scan, velocity and goal vectors. Velocity and goal
/// offsets are expressed in the body frame (x along the heading).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub depth: Vec<f64>,
    /// `[vx, vy, vz]`, m/s.
    pub velocity: [f64; 3],
    /// `[X_goal, Y_goal, D_goal]`, m.
    pub position: [f64; 3],
}

impl Observation {
    /// Flattened `depth ‖ velocity ‖ position`.
    pub fn to_input(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.depth.len() + 6);
        v.extend_from_slice(&self.depth);
        v.extend_from_slice(&self.velocity);
        v.extend_from_slice(&self.position);
        v
    }
}

pub fn observe(state: &WorldState, env: &EnvironmentInstance, params: &DynamicsParams) -> Observation {
    let depth = sense_depth(state, env, params);
    let to_body = |v: Vec2| v.rotate(-state.yaw);
    let vb = to_body(state.velocity_xy());
    let delta = env.goal_xy() - state.xy();
    let gb = to_body(delta);
    Observation {
        depth,
        velocity: [vb.x, vb.y, 0.0],
        position: [gb.x, gb.y, math::sqrt(gb.x * gb.x + gb.y * gb.y)],
    }
}

/// One decision: the previous (stale) command keeps running for `t1 + t2`
/// while the new action is fetched and computed, then the new command runs
/// for `t3`.
pub fn decision_step(
    state: &WorldState,
    env: &mut EnvironmentInstance,
    previous: &VelocityCommand,
    new: &VelocityCommand,
    latency: &LatencySample,
    params: &DynamicsParams,
) -> StepOutcome {
    let stale = latency.t1 + latency.t2;
    let mut out = if stale > 0.0 {
        let first = step_physics(state, env, previous, stale, params);
        if first.events.any() {
            first
        } else {
            let second = step_physics(&first.new_state, env, new, latency.t3, params);
            let mut samples = first.motion_samples;
            samples.extend(second.motion_samples);
            let mut events = first.events;
            events.merge(second.events);
            StepOutcome {
                new_state: second.new_state,
                events,
                motion_samples: samples,
            }
        }
    } else {
        step_physics(state, env, new, latency.t3, params)
    };
    out.new_state.decision_steps_taken += 1;
    if out.new_state.decision_steps_taken >= env.config.max_decision_steps && !out.events.any() {
        out.events.step_budget_exhausted = true;
    }
    out
}
