//! Core of the airgap UAV navigation benchmark.
//!
//! Everything in this crate is a pure function of its inputs: world
//! generation, flight kinematics, the power model, the policy networks and
//! their training rules, latency models and the quality-of-flight arithmetic.
//! IO (config files, checkpoints, the inference wire protocol, wall-clock
//! profiling) lives in the `airgap` companion crate.

#![no_std]
// negated comparisons are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod dynamics;
pub mod energy;
pub mod envgen;
pub mod latency;
pub mod math;
pub mod nn;
pub mod qof;
pub mod rng;

pub use dynamics::{DynamicsParams, Observation, VelocityCommand, WorldState};
pub use energy::{EnergyCoefficients, EnergyState};
pub use envgen::{CurriculumZone, EnvConfig, EnvironmentInstance, Obstacle};
pub use latency::{LatencyModel, LatencySample, SafetyParams};
pub use nn::{AblationMask, PolicyNetwork, PolicyTemplate};
pub use qof::{EpisodeRecord, GapReport, Outcome, QofReport};
