//! Shaped navigation reward.
//!
//! `r = 1000·goal − 1000·collision − D_goal + closer·D_corr`, where
//! `D_corr = (V_max − V_now)·t_max` rewards slowing down while closing in.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub goal_bonus: f64,
    pub collision_penalty: f64,
    /// Largest commanded speed, m/s.
    pub v_max: f64,
    /// Action duration, s.
    pub t_max: f64,
}

impl RewardParams {
    pub fn new(v_max: f64, t_max: f64) -> Self {
        RewardParams {
            goal_bonus: 1000.0,
            collision_penalty: 1000.0,
            v_max,
            t_max,
        }
    }
}

/// Reward for one decision. `closer` is set iff the goal distance strictly
/// decreased since the previous decision.
pub fn compute_reward(
    reached_goal: bool,
    collided: bool,
    goal_distance: f64,
    prev_goal_distance: f64,
    speed: f64,
    p: &RewardParams,
) -> f64 {
    let alpha = if reached_goal { 1.0 } else { 0.0 };
    let beta = if collided { 1.0 } else { 0.0 };
    let closer = if goal_distance < prev_goal_distance { 1.0 } else { 0.0 };
    let correction = (p.v_max - speed) * p.t_max;
    p.goal_bonus * alpha - p.collision_penalty * beta - goal_distance + correction * closer
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let p = RewardParams::new(5.0, 0.5);
        assert_eq!(compute_reward(true, false, 1.0, 2.0, 2.0, &p), 1000.5);
        assert_eq!(compute_reward(false, true, 10.0, 9.0, 3.0, &p), -1010.0);
        assert_eq!(compute_reward(false, false, 12.0, 12.0, 1.0, &p), -12.0);
    }
}
