//! Decision-latency models, per-decision sampling, the maximum safe velocity
//! and action-space scaling used to train latency-aware policies.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ActionMapping;
use crate::math::{linspace, sqrt};

/// Per-decision latencies in seconds: state fetch, inference, actuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl LatencySample {
    pub fn zero(t3: f64) -> Self {
        LatencySample { t1: 0.0, t2: 0.0, t3 }
    }

    /// Time the previous action keeps running before the new one applies.
    pub fn stale(&self) -> f64 {
        self.t1 + self.t2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatencyDist {
    Constant { value: f64 },
    /// Normal truncated at zero.
    Gaussian { mean: f64, std: f64 },
    Empirical { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatencyError {
    #[error("empirical latency distribution is empty")]
    EmptyEmpirical,
    #[error("latency values must be finite and non-negative")]
    InvalidValue,
}

impl LatencyDist {
    pub fn zero() -> Self {
        LatencyDist::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<(), LatencyError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            LatencyDist::Constant { value } if !ok(*value) => Err(LatencyError::InvalidValue),
            LatencyDist::Gaussian { mean, std } if !(mean.is_finite() && ok(*std)) => {
                Err(LatencyError::InvalidValue)
            }
            LatencyDist::Empirical { samples } if samples.is_empty() => Err(LatencyError::EmptyEmpirical),
            LatencyDist::Empirical { samples } if !samples.iter().all(|&v| ok(v)) => {
                Err(LatencyError::InvalidValue)
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Gaussian { mean, std } => {
                if *std == 0.0 {
                    return mean.max(0.0);
                }
                let n = Normal::new(*mean, *std).expect("validated std");
                n.sample(rng).max(0.0)
            }
            LatencyDist::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    /// Upper bound used for the safety cap: the largest observed sample, or
    /// mean + 3 std for the parametric model.
    pub fn worst_case(&self) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Gaussian { mean, std } => (mean + 3.0 * std).max(0.0),
            LatencyDist::Empirical { samples } => samples.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Gaussian { mean, .. } => mean.max(0.0),
            LatencyDist::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }
}

/// Separate state-fetch and inference distributions plus a fixed actuation
/// duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub t1: LatencyDist,
    pub t2: LatencyDist,
    pub t3: f64,
}

impl LatencyModel {
    pub fn zero(t3: f64) -> Self {
        LatencyModel {
            t1: LatencyDist::zero(),
            t2: LatencyDist::zero(),
            t3,
        }
    }

    /// Constant inference delay in seconds.
    pub fn constant_t2(t2: f64, t3: f64) -> Self {
        LatencyModel {
            t1: LatencyDist::zero(),
            t2: LatencyDist::Constant { value: t2 },
            t3,
        }
    }

    pub fn validate(&self) -> Result<(), LatencyError> {
        self.t1.validate()?;
        self.t2.validate()?;
        if !(self.t3.is_finite() && self.t3 >= 0.0) {
            return Err(LatencyError::InvalidValue);
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatencySample {
        let t1 = self.t1.sample(rng);
        let t2 = self.t2.sample(rng);
        LatencySample { t1, t2, t3: self.t3 }
    }

    /// Worst-case time from observation to the end of actuation.
    pub fn response_latency(&self) -> f64 {
        self.t1.worst_case() + self.t2.worst_case() + self.t3
    }

    pub fn is_zero(&self) -> bool {
        self.t1.worst_case() == 0.0 && self.t2.worst_case() == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyParams {
    /// Maximum braking deceleration, m/s^2.
    pub a_brake: f64,
    /// Sensing distance, m.
    pub d_sense: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams {
            a_brake: 5.0,
            d_sense: 20.0,
        }
    }
}

/// Largest speed `v` with `v * latency + v^2 / (2 a) <= d`: the vehicle can
/// react and then brake to a stop within its sensing distance.
pub fn max_safe_velocity(response_latency: f64, safety: &SafetyParams) -> f64 {
    let a = safety.a_brake;
    let d = safety.d_sense;
    if !(a > 0.0) || !(d > 0.0) {
        return 0.0;
    }
    let l = response_latency.max(0.0);
    // rationalized root, stable for large latency
    let v = 2.0 * d / (l + sqrt(l * l + 2.0 * d / a));
    v.max(0.0)
}

/// Rescales translational speeds so nothing exceeds `v_cap`; yaw rates are
/// unchanged.
pub fn scale_action_space(mapping: &ActionMapping, v_cap: f64) -> ActionMapping {
    let lo = v_cap.min(1.0);
    ActionMapping {
        forward: linspace(lo, v_cap),
        backward: linspace(lo, v_cap),
        yaw_right: mapping.yaw_right,
        yaw_left: mapping.yaw_left,
        continuous: [lo, v_cap],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    #[test]
    fn constant_draws() {
        let m = LatencyModel::constant_t2(0.150, 0.5);
        let mut r = rng::stream(1, 0, rng::tag::LATENCY);
        for _ in 0..100 {
            let s = m.sample(&mut r);
            assert_eq!(s.t2, 0.150);
            assert_eq!(s.t1, 0.0);
            assert_eq!(s.t3, 0.5);
        }
        let z = LatencyModel::zero(0.5).sample(&mut r);
        assert_eq!(z, LatencySample::zero(0.5));
    }

    #[test]
    fn empirical_frequencies() {
        let d = LatencyDist::Empirical {
            samples: vec![0.3, 0.4, 0.5],
        };
        let mut r = rng::stream(2, 0, rng::tag::LATENCY);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let v = d.sample(&mut r);
            let i = [0.3, 0.4, 0.5].iter().position(|&x| x == v).unwrap();
            counts[i] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn gaussian_truncated_nonnegative() {
        let d = LatencyDist::Gaussian { mean: 0.01, std: 0.05 };
        let mut r = rng::stream(3, 0, rng::tag::LATENCY);
        for _ in 0..1000 {
            let v = d.sample(&mut r);
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn empty_empirical_rejected() {
        let d = LatencyDist::Empirical { samples: vec![] };
        assert_eq!(d.validate(), Err(LatencyError::EmptyEmpirical));
    }

    #[test]
    fn safe_velocity_closed_forms() {
        let s = SafetyParams { a_brake: 5.0, d_sense: 10.0 };
        assert!((max_safe_velocity(0.0, &s) - 10.0).abs() < 1e-12);
        // root of v^2/10 + 0.4 v - 10 = 0
        let v = max_safe_velocity(0.4, &s);
        assert!((v * 0.4 + v * v / 10.0 - 10.0).abs() < 1e-9);
        assert!((v - 8.198039027185569).abs() < 1e-9);
        let tiny = SafetyParams { a_brake: 5.0, d_sense: 1e-9 };
        assert!(max_safe_velocity(0.4, &tiny) < 1e-8);
    }

    #[test]
    fn scaling_identity_and_cap() {
        let m = ActionMapping::default();
        assert_eq!(scale_action_space(&m, 5.0), m);
        let s = scale_action_space(&m, 2.5);
        assert_eq!(s.forward[9], 2.5);
        assert_eq!(s.yaw_left, m.yaw_left);
        for id in 0..25 {
            let c = s.discrete(id, 0.7, 0.5).unwrap();
            assert!(c.target_velocity.norm() <= 2.5 + 1e-12);
        }
        let low = scale_action_space(&m, 0.4);
        assert_eq!(low.forward[0], 0.4);
        assert_eq!(low.forward[9], 0.4);
    }

    #[test]
    fn scaling_idempotent_at_current_max() {
        let s = scale_action_space(&ActionMapping::default(), 3.2);
        assert_eq!(scale_action_space(&s, s.max_speed()), s);
    }
}
