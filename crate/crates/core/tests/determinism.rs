//! Reproducibility and generator audits.

use airgap_core::agents::{
    eval_episode_indices, evaluate, run_episode, DqnConfig, DqnTrainer, EvalOptions, NavSettings, TrainEvent, TrainSetup,
};
use airgap_core::envgen::{generate, CountSpec, CurriculumZone, EnvConfig, ObstacleKind};
use airgap_core::latency::LatencyModel;
use airgap_core::nn::{InputSpec, OutputSpec, PolicyNetwork, PolicyTemplate};
use airgap_core::qof::aggregate;
use proptest::prelude::*;

fn obstacle_env(seed: u64) -> EnvConfig {
    EnvConfig {
        num_static_obstacles: CountSpec::Fixed(6),
        num_dynamic_obstacles: CountSpec::Fixed(2),
        seed,
        ..EnvConfig::default()
    }
}

fn random_net(seed: u64) -> PolicyNetwork {
    PolicyNetwork::build(
        PolicyTemplate::new(2, 4),
        InputSpec::new(NavSettings::default().dynamics.n_rays),
        OutputSpec::Discrete { actions: 25 },
        seed,
    )
    .unwrap()
}

#[test]
fn regeneration_is_bit_identical() {
    let env = obstacle_env(42);
    for e in 0..20 {
        let a = generate(&env, e, None).unwrap();
        let b = generate(&env, e, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
    assert_ne!(generate(&env, 0, None).unwrap(), generate(&env, 1, None).unwrap());
}

#[test]
fn zero_latency_trajectories_are_bit_identical() {
    let env = obstacle_env(3);
    let net = random_net(8);
    let mut opts = EvalOptions::zero_latency(0.5);
    opts.record_trajectories = true;
    for e in eval_episode_indices(5) {
        let (ra, ta) = run_episode(&net, &NavSettings::default(), &env, e, &opts).unwrap();
        let (rb, tb) = run_episode(&net, &NavSettings::default(), &env, e, &opts).unwrap();
        assert_eq!(ra, rb);
        let (ta, tb) = (ta.unwrap(), tb.unwrap());
        assert!(ta.len() > 1);
        assert!(ta.iter().zip(&tb).all(|(a, b)| a.x.to_bits() == b.x.to_bits() && a.y.to_bits() == b.y.to_bits()));
        assert_eq!(ta, tb);
    }
}

#[test]
fn reports_are_identical_under_fixed_seeds() {
    let env = obstacle_env(4);
    let net = random_net(9);
    let mut opts = EvalOptions::zero_latency(0.5);
    opts.latency = LatencyModel {
        t2: airgap_core::latency::LatencyDist::Gaussian { mean: 0.1, std: 0.05 },
        ..LatencyModel::zero(0.5)
    };
    opts.latency_seed = 17;
    let idx = eval_episode_indices(10);
    let a = aggregate(&evaluate(&net, &NavSettings::default(), &env, &idx, &opts).unwrap(), "h", "c");
    let b = aggregate(&evaluate(&net, &NavSettings::default(), &env, &idx, &opts).unwrap(), "h", "c");
    assert_eq!(a, b);
}

#[test]
fn training_is_reproducible() {
    let setup = TrainSetup {
        env: obstacle_env(5),
        settings: NavSettings::default(),
        template: PolicyTemplate::new(1, 4),
        curriculum: false,
        curriculum_window: 1000,
        latency: None,
        seed: 21,
    };
    let cfg = DqnConfig {
        total_steps: 1500,
        learn_start: 200,
        ..DqnConfig::default()
    };
    let run = || {
        let mut t = DqnTrainer::new(setup.clone(), cfg.clone()).unwrap();
        let mut rewards = Vec::new();
        while !t.is_finished() {
            for ev in t.step().unwrap() {
                if let TrainEvent::Episode(l) = ev {
                    rewards.push(l.reward.to_bits());
                }
            }
        }
        (t.net.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>(), rewards)
    };
    assert_eq!(run(), run());
}

#[test]
fn zone_goals_stay_inside_their_radius() {
    let env = EnvConfig {
        arena_size: [50.0, 50.0, 5.0],
        ..EnvConfig::default()
    };
    let zone = CurriculumZone::for_arena(0, 50.0);
    assert_eq!(zone.radius, 16.0);
    for e in 0..1000 {
        let inst = generate(&env, e, Some(zone)).unwrap();
        assert!(inst.goal_xy().distance(inst.start_xy()) <= 16.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn placement_audit(
        seed in any::<u64>(),
        length in 20.0..60.0f64,
        width in 20.0..60.0f64,
        n_static in 0u32..8,
        n_dynamic in 0u32..4,
        min_distance in 0.5..4.0f64,
        episode in 0u64..1000,
    ) {
        let env = EnvConfig {
            arena_size: [length, width, 5.0],
            num_static_obstacles: CountSpec::Fixed(n_static),
            num_dynamic_obstacles: CountSpec::Fixed(n_dynamic),
            min_distance,
            seed,
            ..EnvConfig::default()
        };
        let mut inst = generate(&env, episode, None).unwrap();
        prop_assert_eq!(inst.obstacles.len() as u32, n_static + n_dynamic);
        let (hl, hw) = (env.half_length(), env.half_width());
        let inside = |o: &airgap_core::Obstacle| {
            o.min_corner().x >= -hl - 1e-9 && o.max_corner().x <= hl + 1e-9
                && o.min_corner().y >= -hw - 1e-9 && o.max_corner().y <= hw + 1e-9
        };
        for (i, a) in inst.obstacles.iter().enumerate() {
            prop_assert!(inside(a));
            prop_assert!(a.center.distance(inst.goal_xy()) >= min_distance);
            for b in &inst.obstacles[i + 1..] {
                prop_assert!(a.center.distance(b.center) >= min_distance);
            }
        }
        prop_assert!(env.contains_strict(inst.goal));
        prop_assert!(inst.goal_xy().distance(inst.start_xy()) >= min_distance);
        let statics: Vec<_> = inst.obstacles.iter().filter(|o| o.kind == ObstacleKind::Static).map(|o| o.center).collect();
        for _ in 0..400 {
            inst.advance_dynamic_obstacles(0.05);
            prop_assert!(inst.obstacles.iter().all(inside));
        }
        let after: Vec<_> = inst.obstacles.iter().filter(|o| o.kind == ObstacleKind::Static).map(|o| o.center).collect();
        prop_assert_eq!(statics, after);
    }
}
