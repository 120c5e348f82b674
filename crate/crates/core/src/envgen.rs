//! Seeded generation of randomized navigation worlds.
//!
//! The world is planar at a fixed flight altitude: obstacles are
//! axis-aligned boxes spanning the full arena height. The arena is centered
//! on the origin, `x ∈ [-L/2, L/2]`, `y ∈ [-W/2, W/2]`, and the vehicle
//! always spawns at the origin with a random heading.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{sqrt, Vec2, PI};
use crate::rng::{self, tag};

/// Total rejection-sampling draws allowed for one `generate` call.
pub const PLACEMENT_BUDGET: u32 = 10_000;
/// Minimum clearance between an obstacle surface and the start or goal point.
pub const SPAWN_CLEARANCE: f64 = 1.0;
/// Random goals keep this distance from the arena walls.
pub const GOAL_WALL_MARGIN: f64 = 1.0;
/// Zone radii for a 50 m arena; scaled by `arena_length / 50`.
pub const ZONE_RADII_50M: [f64; 3] = [16.0, 32.0, 48.0];

/// Either a fixed obstacle count or an inclusive range sampled per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountSpec {
    Fixed(u32),
    Range([u32; 2]),
}

impl CountSpec {
    pub fn bounds(self) -> (u32, u32) {
        match self {
            CountSpec::Fixed(n) => (n, n),
            CountSpec::Range([a, b]) => (a, b),
        }
    }

    fn sample<R: Rng>(self, rng: &mut R) -> u32 {
        let (lo, hi) = self.bounds();
        if lo >= hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }
}

impl Default for CountSpec {
    fn default() -> Self {
        CountSpec::Fixed(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomGoal {
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalSpec {
    Fixed([f64; 3]),
    Random(RandomGoal),
}

impl Default for GoalSpec {
    fn default() -> Self {
        GoalSpec::Random(RandomGoal::Random)
    }
}

/// Environment generator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// `[length, width, height]` in meters.
    pub arena_size: [f64; 3],
    /// Retained for config fidelity; the simulator is renderless.
    pub wall_colors: [u8; 3],
    pub num_static_obstacles: CountSpec,
    pub num_dynamic_obstacles: CountSpec,
    pub seed: u64,
    #[serde(rename = "minimum_distance")]
    pub min_distance: f64,
    pub goal_position: GoalSpec,
    /// `[v_min, v_max]` for dynamic obstacles, m/s.
    #[serde(rename = "velocity")]
    pub dynamic_velocity_range: [f64; 2],
    /// `[min_edge, max_edge]`, m.
    pub obstacle_size_range: [f64; 2],
    pub goal_radius: f64,
    pub max_decision_steps: u32,
    /// Coulombs; 0 means unlimited.
    pub battery_capacity: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            arena_size: [25.0, 25.0, 5.0],
            wall_colors: [255, 255, 255],
            num_static_obstacles: CountSpec::Fixed(0),
            num_dynamic_obstacles: CountSpec::Fixed(0),
            seed: 0,
            min_distance: 2.0,
            goal_position: GoalSpec::default(),
            dynamic_velocity_range: [1.0, 2.5],
            obstacle_size_range: [1.0, 3.0],
            goal_radius: 1.5,
            max_decision_steps: 100,
            battery_capacity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("arena dimensions must be positive")]
    NonPositiveArena,
    #[error("{0} must be non-negative")]
    NegativeCount(&'static str),
    #[error("{0} count range unordered")]
    CountRangeUnordered(&'static str),
    #[error("velocity range unordered")]
    VelocityRangeUnordered,
    #[error("velocity must be non-negative")]
    NegativeVelocity,
    #[error("minimum distance must be non-negative")]
    NegativeMinDistance,
    #[error("goal position outside arena")]
    GoalOutsideArena,
    #[error("obstacle size range must be positive and ordered")]
    InvalidObstacleSize,
    #[error("goal radius must be positive")]
    NonPositiveGoalRadius,
    #[error("max decision steps must be positive")]
    ZeroStepBudget,
    #[error("battery capacity must be non-negative")]
    NegativeCapacity,
    #[error("wall color component out of range 0-255")]
    WallColorRange,
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: &'static str, reason: &'static str },
}

impl EnvConfig {
    pub fn half_length(&self) -> f64 {
        self.arena_size[0] / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.arena_size[1] / 2.0
    }

    /// Flight altitude, the arena mid-height.
    pub fn altitude(&self) -> f64 {
        self.arena_size[2] / 2.0
    }

    /// True if `p` lies strictly inside the arena footprint and height.
    pub fn contains_strict(&self, p: [f64; 3]) -> bool {
        p[0].abs() < self.half_length()
            && p[1].abs() < self.half_width()
            && p[2] > 0.0
            && p[2] < self.arena_size[2]
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        let mut errs = Vec::new();
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let arena_ok = self.arena_size.iter().all(|&d| finite_pos(d));
        if !arena_ok {
            errs.push(ConfigError::NonPositiveArena);
        }
        for (name, spec) in [
            ("num_static_obstacles", self.num_static_obstacles),
            ("num_dynamic_obstacles", self.num_dynamic_obstacles),
        ] {
            let (lo, hi) = spec.bounds();
            if lo > hi {
                errs.push(ConfigError::CountRangeUnordered(name));
            }
        }
        let [vmin, vmax] = self.dynamic_velocity_range;
        if !(vmin.is_finite() && vmax.is_finite()) || vmin < 0.0 {
            errs.push(ConfigError::NegativeVelocity);
        } else if vmin > vmax {
            errs.push(ConfigError::VelocityRangeUnordered);
        }
        if !(self.min_distance >= 0.0) {
            errs.push(ConfigError::NegativeMinDistance);
        }
        if let GoalSpec::Fixed(g) = self.goal_position {
            if arena_ok && !self.contains_strict(g) {
                errs.push(ConfigError::GoalOutsideArena);
            }
        }
        let [smin, smax] = self.obstacle_size_range;
        if !(smin > 0.0 && smax.is_finite() && smin <= smax) {
            errs.push(ConfigError::InvalidObstacleSize);
        }
        if !(self.goal_radius > 0.0) {
            errs.push(ConfigError::NonPositiveGoalRadius);
        }
        if self.max_decision_steps == 0 {
            errs.push(ConfigError::ZeroStepBudget);
        }
        if !(self.battery_capacity >= 0.0) {
            errs.push(ConfigError::NegativeCapacity);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub kind: ObstacleKind,
    pub center: Vec2,
    pub half_extents: Vec2,
    pub velocity: Vec2,
}

impl Obstacle {
    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let dx = ((p.x - self.center.x).abs() - self.half_extents.x).max(0.0);
        let dy = ((p.y - self.center.y).abs() - self.half_extents.y).max(0.0);
        sqrt(dx * dx + dy * dy)
    }

    pub fn min_corner(&self) -> Vec2 {
        self.center - self.half_extents
    }

    pub fn max_corner(&self) -> Vec2 {
        self.center + self.half_extents
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumZone {
    pub index: u8,
    pub radius: f64,
}

impl CurriculumZone {
    /// Zone `index` (0..=2) with its default radius scaled to the arena length.
    pub fn for_arena(index: u8, arena_length: f64) -> Self {
        let k = (index as usize).min(ZONE_RADII_50M.len() - 1);
        CurriculumZone {
            index: k as u8,
            radius: ZONE_RADII_50M[k] * arena_length / 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentInstance {
    pub config: EnvConfig,
    pub episode_index: u64,
    pub zone: Option<CurriculumZone>,
    pub obstacles: Vec<Obstacle>,
    pub goal: [f64; 3],
    pub start_position: [f64; 3],
    pub start_yaw: f64,
    pub derived_rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("invalid environment config")]
    InvalidConfig(Vec<ConfigError>),
    #[error("placement infeasible: rejection budget of {budget} draws exhausted while placing {what}")]
    PlacementInfeasible { what: &'static str, budget: u32 },
}

struct Budget(u32);

impl Budget {
    fn draw(&mut self, what: &'static str) -> Result<(), GenerateError> {
        if self.0 >= PLACEMENT_BUDGET {
            return Err(GenerateError::PlacementInfeasible {
                what,
                budget: PLACEMENT_BUDGET,
            });
        }
        self.0 += 1;
        Ok(())
    }
}

/// Builds the world for `episode_index`. Pure in `(config, episode_index, zone)`.
pub fn generate(
    config: &EnvConfig,
    episode_index: u64,
    zone: Option<CurriculumZone>,
) -> Result<EnvironmentInstance, GenerateError> {
    config.validate().map_err(GenerateError::InvalidConfig)?;
    let seed = config.seed;
    let derived = rng::derive_seed(seed, episode_index, tag::OBSTACLES);
    let hl = config.half_length();
    let hw = config.half_width();
    let start = Vec2::ZERO;
    let mut budget = Budget(0);

    let mut start_rng = rng::stream(seed, episode_index, tag::START);
    let start_yaw = start_rng.random_range(-PI..PI);

    let fixed_goal = match config.goal_position {
        GoalSpec::Fixed(g) => Some(Vec2::new(g[0], g[1])),
        GoalSpec::Random(_) => None,
    };

    let mut orng = rng::stream(seed, episode_index, tag::OBSTACLES);
    let n_static = config.num_static_obstacles.sample(&mut orng);
    let n_dynamic = config.num_dynamic_obstacles.sample(&mut orng);
    let [smin, smax] = config.obstacle_size_range;
    let [vmin, vmax] = config.dynamic_velocity_range;
    let mut obstacles: Vec<Obstacle> = Vec::with_capacity((n_static + n_dynamic) as usize);
    for i in 0..(n_static + n_dynamic) {
        let kind = if i < n_static {
            ObstacleKind::Static
        } else {
            ObstacleKind::Dynamic
        };
        let what = match kind {
            ObstacleKind::Static => "static obstacles",
            ObstacleKind::Dynamic => "dynamic obstacles",
        };
        let placed = loop {
            budget.draw(what)?;
            let ex = sample_range(&mut orng, smin, smax);
            let ey = sample_range(&mut orng, smin, smax);
            let half = Vec2::new(ex / 2.0, ey / 2.0);
            if half.x >= hl || half.y >= hw {
                continue;
            }
            let center = Vec2::new(
                orng.random_range(-(hl - half.x)..=(hl - half.x)),
                orng.random_range(-(hw - half.y)..=(hw - half.y)),
            );
            let candidate = Obstacle {
                id: i,
                kind,
                center,
                half_extents: half,
                velocity: Vec2::ZERO,
            };
            if !point_clear(&candidate, start, config.min_distance) {
                continue;
            }
            if let Some(g) = fixed_goal {
                if !point_clear(&candidate, g, config.min_distance) {
                    continue;
                }
            }
            if obstacles
                .iter()
                .any(|o| o.center.distance(center) < config.min_distance)
            {
                continue;
            }
            break candidate;
        };
        let mut placed = placed;
        if kind == ObstacleKind::Dynamic {
            let speed = sample_range(&mut orng, vmin, vmax);
            let heading = orng.random_range(-PI..PI);
            placed.velocity = Vec2::from_angle(heading) * speed;
        }
        obstacles.push(placed);
    }

    let goal = match fixed_goal {
        Some(g) => g,
        None => {
            let zone_tag = tag::GOAL ^ zone.map_or(0xFF, |z| z.index as u64);
            let mut grng = rng::stream(seed, episode_index, zone_tag);
            let gx = (hl - GOAL_WALL_MARGIN).max(0.0);
            let gy = (hw - GOAL_WALL_MARGIN).max(0.0);
            loop {
                budget.draw("goal")?;
                let g = match zone {
                    Some(z) => {
                        let r = z.radius * sqrt(grng.random::<f64>());
                        let th = grng.random_range(-PI..PI);
                        start + Vec2::from_angle(th) * r
                    }
                    None => Vec2::new(
                        grng.random_range(-gx..=gx),
                        grng.random_range(-gy..=gy),
                    ),
                };
                if g.x.abs() > gx || g.y.abs() > gy {
                    continue;
                }
                if g.distance(start) < config.min_distance.max(config.goal_radius) {
                    continue;
                }
                if obstacles
                    .iter()
                    .all(|o| point_clear(o, g, config.min_distance))
                {
                    break g;
                }
            }
        }
    };

    let z = config.altitude();
    Ok(EnvironmentInstance {
        config: config.clone(),
        episode_index,
        zone,
        obstacles,
        goal: [goal.x, goal.y, z],
        start_position: [start.x, start.y, z],
        start_yaw,
        derived_rng_seed: derived,
    })
}

fn sample_range<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn point_clear(o: &Obstacle, p: Vec2, min_distance: f64) -> bool {
    o.center.distance(p) >= min_distance && o.distance_to_point(p) >= SPAWN_CLEARANCE
}

impl EnvironmentInstance {
    pub fn goal_xy(&self) -> Vec2 {
        Vec2::new(self.goal[0], self.goal[1])
    }

    pub fn start_xy(&self) -> Vec2 {
        Vec2::new(self.start_position[0], self.start_position[1])
    }

    /// Moves dynamic obstacles by `velocity * dt`, mirroring off the walls.
    /// Obstacles pass through each other.
    pub fn advance_dynamic_obstacles(&mut self, dt: f64) {
        let hl = self.config.half_length();
        let hw = self.config.half_width();
        for o in self
            .obstacles
            .iter_mut()
            .filter(|o| o.kind == ObstacleKind::Dynamic)
        {
            o.center += o.velocity * dt;
            reflect_axis(&mut o.center.x, &mut o.velocity.x, o.half_extents.x, hl);
            reflect_axis(&mut o.center.y, &mut o.velocity.y, o.half_extents.y, hw);
        }
    }
}

fn reflect_axis(c: &mut f64, v: &mut f64, half: f64, bound: f64) {
    let lo = -bound + half;
    let hi = bound - half;
    if hi <= lo {
        *c = 0.0;
        return;
    }
    // Mirror until inside; handles several bounces in one long step.
    for _ in 0..64 {
        if *c > hi {
            *c = 2.0 * hi - *c;
            *v = -v.abs();
        } else if *c < lo {
            *c = 2.0 * lo - *c;
            *v = v.abs();
        } else {
            return;
        }
    }
    *c = c.clamp(lo, hi);
}
