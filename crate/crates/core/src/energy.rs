//! Multirotor power model and coulomb-counting battery.
//!
//! Power is linear in planar and vertical speed and acceleration norms, their
//! products, vehicle mass and the projection of the velocity on the ambient
//! wind. The coefficient defaults are illustrative values that put hover at
//! about 82 W for a 1 kg vehicle; they are not fitted to any airframe.

use serde::{Deserialize, Serialize};

use crate::dynamics::MotionSample;
use crate::math::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyCoefficients {
    pub beta: [f64; 9],
    /// kg
    pub mass: f64,
    /// Ambient wind, m/s.
    pub wind: [f64; 2],
    /// V
    pub nominal_voltage: f64,
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        EnergyCoefficients {
            beta: [5.0, 1.0, 0.5, 4.0, 1.0, 0.5, 2.0, 1.0, 80.0],
            mass: 1.0,
            wind: [0.0, 0.0],
            nominal_voltage: 11.1,
        }
    }
}

/// Instantaneous electrical power in W, clamped at zero.
pub fn instantaneous_power(v_xy: Vec2, a_xy: Vec2, v_z: f64, a_z: f64, c: &EnergyCoefficients) -> f64 {
    let b = &c.beta;
    let vxy = v_xy.norm();
    let axy = a_xy.norm();
    let vz = v_z.abs();
    let az = a_z.abs();
    let wind = Vec2::new(c.wind[0], c.wind[1]);
    let p = b[0] * vxy
        + b[1] * axy
        + b[2] * vxy * axy
        + b[3] * vz
        + b[4] * az
        + b[5] * vz * az
        + b[6] * c.mass
        + b[7] * v_xy.dot(wind)
        + b[8];
    p.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyState {
    pub energy_joules: f64,
    pub charge_coulombs: f64,
    /// Coulombs; 0 means unlimited.
    pub capacity: f64,
    pub exhausted: bool,
}

impl EnergyState {
    pub fn with_capacity(capacity: f64) -> Self {
        EnergyState {
            capacity,
            ..EnergyState::default()
        }
    }

    /// Adds `power * dt` of energy and `power / V_nom * dt` of charge.
    pub fn accumulate(&mut self, power: f64, dt: f64, c: &EnergyCoefficients) {
        let p = power.max(0.0);
        let dt = dt.max(0.0);
        self.energy_joules += p * dt;
        self.charge_coulombs += p / c.nominal_voltage * dt;
        self.exhausted = self.capacity > 0.0 && self.charge_coulombs >= self.capacity;
    }

    /// Integrates the planar motion samples of one step (vertical terms are zero).
    pub fn accumulate_samples(&mut self, samples: &[MotionSample], c: &EnergyCoefficients) {
        for s in samples {
            let p = instantaneous_power(s.v_xy, s.a_xy, 0.0, 0.0, c);
            self.accumulate(p, s.dt, c);
        }
    }

    pub fn energy_kj(&self) -> f64 {
        self.energy_joules / 1000.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_power() {
        let c = EnergyCoefficients::default();
        let p = instantaneous_power(Vec2::ZERO, Vec2::ZERO, 0.0, 0.0, &c);
        assert_eq!(p, c.beta[6] * c.mass + c.beta[8]);
        assert_eq!(p, 82.0);
    }

    #[test]
    fn planar_flight_ignores_vertical_terms() {
        let mut c = EnergyCoefficients::default();
        let v = Vec2::new(2.0, -1.0);
        let a = Vec2::new(0.3, 0.4);
        let p1 = instantaneous_power(v, a, 0.0, 0.0, &c);
        c.beta[3] = 123.0;
        c.beta[4] = -7.0;
        c.beta[5] = 9.0;
        assert_eq!(p1, instantaneous_power(v, a, 0.0, 0.0, &c));
    }

    #[test]
    fn forward_flight_term_by_term() {
        let c = EnergyCoefficients::default();
        // 5*2 + 1*1 + 0.5*2*1 + 2*1 + 80
        let p = instantaneous_power(Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0), 0.0, 0.0, &c);
        assert!((p - 94.0).abs() < 1e-12);
    }

    #[test]
    fn strong_tailwind_clamps_at_zero() {
        let c = EnergyCoefficients {
            wind: [-200.0, 0.0],
            ..EnergyCoefficients::default()
        };
        assert_eq!(instantaneous_power(Vec2::new(5.0, 0.0), Vec2::ZERO, 0.0, 0.0, &c), 0.0);
    }

    #[test]
    fn coulomb_counting() {
        let c = EnergyCoefficients::default();
        let mut s = EnergyState::default();
        s.accumulate(100.0, 10.0, &c);
        assert!((s.energy_joules - 1000.0).abs() < 1e-12);
        assert!((s.charge_coulombs - 90.09009009009009).abs() < 1e-9);
    }

    #[test]
    fn substeps_sum_to_lump() {
        let c = EnergyCoefficients::default();
        let mut lump = EnergyState::default();
        lump.accumulate(87.5, 1.0, &c);
        let mut parts = EnergyState::default();
        for _ in 0..50 {
            parts.accumulate(87.5, 0.02, &c);
        }
        assert!((lump.energy_joules - parts.energy_joules).abs() < 1e-9);
        assert!((lump.charge_coulombs - parts.charge_coulombs).abs() < 1e-9);
    }

    #[test]
    fn exhaustion_threshold() {
        let c = EnergyCoefficients {
            nominal_voltage: 1.0,
            ..EnergyCoefficients::default()
        };
        let mut s = EnergyState::with_capacity(50.0);
        s.accumulate(49.0, 1.0, &c);
        assert!(!s.exhausted);
        s.accumulate(2.0, 1.0, &c);
        assert!(s.exhausted);
    }
}
