//! Acceptance run. Prints one `criterion N: PASS|FAIL: detail` line per
//! criterion. The closed-loop criteria train real policies, so a full run
//! takes several minutes on one core.
//!
//! Exit status is non-zero when any criterion fails, except those listed in
//! `KNOWN_FAILURES`, which still print FAIL.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use airgap::config::{parse_run_config, RunConfig};
use airgap::hilnet::{infer_local, Client, Message, Server, WireAction};
use airgap::mitigate::{evaluate_checkpoint, mitigate, MitigateOptions, Target};
use airgap::run::train;
use airgap::trace::LatencyTrace;
use airgap_core::agents::{
    compute_reward, eval_episode_indices, evaluate, run_episode, CurriculumState, EvalOptions, NavSettings, RewardParams,
};
use airgap_core::energy::{instantaneous_power, EnergyCoefficients};
use airgap_core::envgen::{generate, CountSpec, EnvConfig, ObstacleKind};
use airgap_core::latency::{max_safe_velocity, LatencyModel, SafetyParams};
use airgap_core::math::Vec2;
use airgap_core::nn::{AblationMask, InputSpec, OutputSpec, PolicyNetwork, PolicyTemplate};
use airgap_core::qof::{aggregate, perf_gap, MetricSummary, QofReport};
use airgap_core::rng;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::Rng;
use serde_json::json;

/// Criteria allowed to fail without failing the run; see the decisions log.
const KNOWN_FAILURES: &[u32] = &[1];

const EVAL_EPISODES: usize = 300;
const STATIC_STEPS: u64 = 200_000;
const OPEN_STEPS: u64 = 50_000;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn config(v: serde_json::Value) -> RunConfig {
    parse_run_config(v).expect("acceptance config")
}

// ---------------------------------------------------------------- 1

fn report(success: f64, ft: f64, dist: f64, energy: f64, latency: f64) -> QofReport {
    let m = |mean| Some(MetricSummary { mean, std: 0.0 });
    QofReport {
        n_episodes: 100,
        n_success: success as usize,
        success_rate: success,
        flight_time: m(ft),
        distance: m(dist),
        energy_kj: m(energy),
        mean_latency_ms: latency,
        env_hash: "table".into(),
        checkpoint_id: String::new(),
        means_over: "successful_episodes".into(),
    }
}

fn gap_arithmetic() -> Outcome {
    // (env, fast host, slow host, printed gaps: latency, success, flight, distance, energy)
    let rows = [
        (
            "no obstacles",
            report(91.0, 25.29, 27.59, 19.68, 11.0),
            report(80.0, 37.37, 33.06, 25.483, 396.0),
            [3500.0, 11.0, 47.76, 19.82, 29.48],
        ),
        (
            "static obstacles",
            report(84.0, 30.258, 28.70, 19.2, 10.0),
            report(71.0, 34.44, 32.57, 23.90, 542.28),
            [5322.8, 13.0, 13.85, 13.4, 24.47],
        ),
        (
            "dynamic obstacles",
            report(61.0, 21.48, 23.51, 18.76, 9.3),
            report(55.0, 35.36, 32.86, 24.31, 948.92),
            [10103.4, 6.0, 64.61, 39.77, 29.58],
        ),
    ];
    let names = ["latency", "success", "flight time", "distance", "energy"];
    let mut misses = Vec::new();
    let mut cells = 0;
    for (env, fast, slow, printed) in rows {
        let g = perf_gap(&fast, &slow).map_err(|e| e.to_string())?;
        let got = [
            g.latency_pct.unwrap(),
            g.success_rate_points,
            g.flight_time_pct.unwrap(),
            g.distance_pct.unwrap(),
            g.energy_pct.unwrap(),
        ];
        for i in 0..5 {
            cells += 1;
            if (got[i] - printed[i]).abs() > 0.05 {
                misses.push(format!("{env} {} computes {:.3} vs printed {}", names[i], got[i], printed[i]));
            }
        }
    }
    if misses.is_empty() {
        Ok(format!("{cells}/{cells} cells within 0.05"))
    } else {
        Err(format!("{}/{cells} cells within 0.05; {}", cells - misses.len(), misses.join("; ")))
    }
}

// ---------------------------------------------------------------- 2, 3, 6

fn static_config() -> RunConfig {
    config(json!({
        "env": { "num_static_obstacles": 8, "seed": 0 },
        "agent": {
            "template": "3x16",
            "seed": 1,
            "dqn": { "total_steps": STATIC_STEPS },
            "selection": { "every": 10_000, "episodes": 50 }
        }
    }))
}

fn constant_396() -> LatencyTrace {
    LatencyTrace::new("constant", vec![], vec![0.396], 0.5)
}

/// Runs the mitigation pipeline; its control run is the zero-latency
/// static-obstacles checkpoint reused by the degradation and ablation checks.
fn mitigation(cfg: &RunConfig, dir: &Path) -> Outcome {
    let opts = MitigateOptions {
        eval_episodes: EVAL_EPISODES,
        workers: workers(),
        resume: false,
    };
    let out = mitigate(cfg, Target::Trace(constant_396()), dir, &opts).map_err(|e| e.to_string())?;
    let r = &out.report;
    let ratio = r.flight_time_ratio.ok_or("flight-time gap undefined")?;
    let (with, without) = (r.with_mitigation, r.without_mitigation);
    let detail = format!(
        "flight-time gap {:.2}% with vs {:.2}% without (ratio {ratio:.3}), success gap {:.2} vs {:.2} points",
        with.flight_time_pct.unwrap_or(f64::NAN),
        without.flight_time_pct.unwrap_or(f64::NAN),
        with.success_rate_points,
        without.success_rate_points,
    );
    check(
        ratio <= 0.5 && with.success_rate_points.abs() < without.success_rate_points.abs(),
        detail,
    )
}

fn degradation(cfg: &RunConfig, ckpt: &Path) -> Outcome {
    let mut ft = Vec::new();
    let mut dist = Vec::new();
    for ms in [0.0, 150.0, 300.0] {
        let model = LatencyModel::constant_t2(ms / 1000.0, cfg.dynamics.t3);
        let r = evaluate_checkpoint(ckpt, cfg, &model, EVAL_EPISODES, workers()).map_err(|e| e.to_string())?;
        ft.push(r.flight_time.ok_or("no successful episode")?.mean);
        dist.push(r.distance.ok_or("no successful episode")?.mean);
    }
    let rising = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    check(
        rising(&ft) && rising(&dist),
        format!(
            "flight time {:.2} -> {:.2} -> {:.2} s, distance {:.2} -> {:.2} -> {:.2} m",
            ft[0], ft[1], ft[2], dist[0], dist[1], dist[2]
        ),
    )
}

fn ablation(cfg: &RunConfig, ckpt: &Path) -> Outcome {
    let c = airgap::checkpoint::Checkpoint::load(ckpt).map_err(|e| e.to_string())?;
    let rate = |mask: AblationMask| -> Result<f64, String> {
        let mut opts = EvalOptions::zero_latency(cfg.dynamics.t3);
        opts.mask = mask;
        let recs = airgap::run::evaluate_parallel(
            &c.net,
            &cfg.settings(),
            &cfg.env,
            &eval_episode_indices(EVAL_EPISODES),
            &opts,
            workers(),
            None,
        )
        .map_err(|e| e.to_string())?;
        Ok(aggregate(&recs, "", "").success_rate)
    };
    let none = rate(AblationMask::NONE)?;
    let depth = rate(AblationMask {
        zero_depth: true,
        ..AblationMask::NONE
    })?;
    let position = rate(AblationMask {
        zero_position: true,
        ..AblationMask::NONE
    })?;
    check(
        depth <= none - 30.0 && none - position < none - depth,
        format!("success {none:.1}% unablated, {depth:.1}% depth-ablated, {position:.1}% position-ablated"),
    )
}

// ---------------------------------------------------------------- 4

fn learnability(dir: &Path) -> Outcome {
    let cfg = config(json!({
        "agent": {
            "template": "5x32",
            "seed": 1,
            "dqn": { "total_steps": OPEN_STEPS },
            "selection": { "every": 5_000, "episodes": 50 }
        }
    }));
    let run = train(&cfg, dir, false).map_err(|e| e.to_string())?;
    let zero = LatencyModel::zero(cfg.dynamics.t3);
    let r = evaluate_checkpoint(run.policy(), &cfg, &zero, 100, workers()).map_err(|e| e.to_string())?;
    check(
        r.success_rate >= 70.0,
        format!("{:.0}% success over 100 episodes after {} steps", r.success_rate, run.final_step),
    )
}

// ---------------------------------------------------------------- 5

fn feed(s: &mut CurriculumState, succ: usize, total: usize) -> usize {
    (0..total).filter(|&i| s.record(i < succ).is_some()).count()
}

fn curriculum(dir: &Path) -> Outcome {
    let advance = feed(&mut CurriculumState::default(), 501, 1000);
    let hold_half = feed(&mut CurriculumState::default(), 500, 1000);
    let hold_short = feed(&mut CurriculumState::default(), 999, 999);
    if (advance, hold_half, hold_short) != (1, 0, 0) {
        return Err(format!(
            "advances at 501/1000: {advance}, at 500/1000: {hold_half}, at 999/999: {hold_short}"
        ));
    }

    let cfg = config(json!({
        "env": { "seed": 2 },
        "agent": {
            "template": "2x4",
            "curriculum": true,
            "curriculum_window": 1,
            "dqn": { "total_steps": 3000, "checkpoint_every": 1000 }
        }
    }));
    train(&cfg, dir, false).map_err(|e| e.to_string())?;
    let mut rdr = csv::Reader::from_path(dir.join("train_log.csv")).map_err(|e| e.to_string())?;
    let zones: Vec<u8> = rdr
        .records()
        .map(|r| r.map_err(|e| e.to_string())?[6].parse::<u8>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let completed: Vec<String> = zones
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| format!("zone_{}.ckpt", w[0]))
        .collect();
    let mut files: Vec<String> = std::fs::read_dir(dir.join("zones"))
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    files.sort();
    check(
        !completed.is_empty() && files == completed,
        format!("thresholds hold; {} advances, zone files {files:?}", completed.len()),
    )
}

// ---------------------------------------------------------------- 7

fn probe(net: &PolicyNetwork, x: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
    let cache = net.forward_cached(x, AblationMask::NONE).unwrap();
    let f = cache.output.iter().zip(w).map(|(o, w)| o * w).sum();
    let mut g = vec![0.0; net.params.len()];
    net.backward(&cache, w, &mut g).unwrap();
    (f, g)
}

fn worst_fd_error(template: PolicyTemplate, output: OutputSpec, seed: u64) -> f64 {
    const H: f64 = 1e-5;
    let mut r = rng::stream(seed, 0, 11);
    let input = InputSpec::new(r.random_range(6..20));
    let mut net = PolicyNetwork::build(template, input, output, seed).unwrap();
    for p in &mut net.params {
        *p += r.random_range(-0.05..0.05);
    }
    let x: Vec<f64> = (0..input.len()).map(|_| r.random_range(-2.0..2.0)).collect();
    let w: Vec<f64> = (0..net.output_len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let (_, g) = probe(&net, &x, &w);
    let mut worst = 0.0f64;
    for (i, &gi) in g.iter().enumerate() {
        let orig = net.params[i];
        net.params[i] = orig + H;
        let (fp, _) = probe(&net, &x, &w);
        net.params[i] = orig - H;
        let (fm, _) = probe(&net, &x, &w);
        net.params[i] = orig;
        let fd = (fp - fm) / (2.0 * H);
        worst = worst.max((fd - gi).abs() / fd.abs().max(gi.abs()).max(1.0));
    }
    worst
}

fn power_oracle(v: [f64; 2], a: [f64; 2], c: &EnergyCoefficients) -> f64 {
    let b = c.beta;
    let nv = v[0].hypot(v[1]);
    let na = a[0].hypot(a[1]);
    let p = b[0] * nv + b[1] * na + b[2] * nv * na + b[6] * c.mass + b[7] * (v[0] * c.wind[0] + v[1] * c.wind[1]) + b[8];
    p.max(0.0)
}

fn numerical_core() -> Outcome {
    let mut r = rng::stream(99, 0, 12);
    let mut worst = 0.0f64;
    for trial in 0..8 {
        let t = PolicyTemplate::new(r.random_range(1..5), r.random_range(1..6));
        for output in [OutputSpec::Discrete { actions: 25 }, OutputSpec::Gaussian { action_dim: 2 }] {
            worst = worst.max(worst_fd_error(t, output, trial));
        }
    }
    if worst >= 1e-5 {
        return Err(format!("backprop relative error {worst:e}"));
    }

    let mut power_err = 0.0f64;
    for _ in 0..10_000 {
        let mut c = EnergyCoefficients::default();
        for b in &mut c.beta {
            *b = r.random_range(-10.0..100.0);
        }
        c.mass = r.random_range(0.0..5.0);
        c.wind = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
        let v = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
        let a = [r.random_range(-20.0..20.0), r.random_range(-20.0..20.0)];
        let got = instantaneous_power(Vec2::new(v[0], v[1]), Vec2::new(a[0], a[1]), 0.0, 0.0, &c);
        let want = power_oracle(v, a, &c);
        power_err = power_err.max((got - want).abs() / want.abs().max(1.0));
    }
    if power_err > 1e-12 {
        return Err(format!("power error {power_err:e}"));
    }

    for _ in 0..10_000 {
        let p = RewardParams::new(r.random_range(0.5..10.0), r.random_range(0.05..1.0));
        let (alpha, beta) = (r.random_bool(0.2), r.random_bool(0.2));
        let dg = r.random_range(0.0..60.0);
        let dprev = r.random_range(0.0..60.0);
        let v = r.random_range(0.0..=p.v_max);
        let gamma = if dg < dprev { 1.0 } else { 0.0 };
        let want = 1000.0 * f64::from(u8::from(alpha)) - 1000.0 * f64::from(u8::from(beta)) - dg
            + (p.v_max - v) * p.t_max * gamma;
        let got = compute_reward(alpha, beta, dg, dprev, v, &p);
        if got != want {
            return Err(format!("reward {got} vs closed form {want}"));
        }
    }
    Ok(format!(
        "backprop error {worst:.1e}, power error {power_err:.1e} over 10000, reward exact over 10000"
    ))
}

// ---------------------------------------------------------------- 8

fn obstacle_env(seed: u64) -> EnvConfig {
    EnvConfig {
        num_static_obstacles: CountSpec::Fixed(6),
        num_dynamic_obstacles: CountSpec::Fixed(2),
        seed,
        ..EnvConfig::default()
    }
}

fn audit(env: &EnvConfig, episode: u64) -> Result<(), String> {
    let mut inst = generate(env, episode, None).map_err(|e| e.to_string())?;
    let (hl, hw) = (env.half_length(), env.half_width());
    let inside = |o: &airgap_core::Obstacle| {
        o.min_corner().x >= -hl - 1e-9
            && o.max_corner().x <= hl + 1e-9
            && o.min_corner().y >= -hw - 1e-9
            && o.max_corner().y <= hw + 1e-9
    };
    for (i, a) in inst.obstacles.iter().enumerate() {
        if !inside(a) || a.center.distance(inst.goal_xy()) < env.min_distance {
            return Err(format!("obstacle {i} misplaced (seed {}, episode {episode})", env.seed));
        }
        if inst.obstacles[i + 1..].iter().any(|b| a.center.distance(b.center) < env.min_distance) {
            return Err(format!("obstacles too close (seed {}, episode {episode})", env.seed));
        }
    }
    if !env.contains_strict(inst.goal) || inst.goal_xy().distance(inst.start_xy()) < env.min_distance {
        return Err(format!("goal misplaced (seed {}, episode {episode})", env.seed));
    }
    let statics = |i: &airgap_core::EnvironmentInstance| -> Vec<Vec2> {
        i.obstacles.iter().filter(|o| o.kind == ObstacleKind::Static).map(|o| o.center).collect()
    };
    let before = statics(&inst);
    for _ in 0..400 {
        inst.advance_dynamic_obstacles(0.05);
        if !inst.obstacles.iter().all(inside) {
            return Err(format!("dynamic obstacle left the arena (seed {})", env.seed));
        }
    }
    if statics(&inst) != before {
        return Err("static obstacle moved".into());
    }
    Ok(())
}

fn determinism() -> Outcome {
    let env = obstacle_env(42);
    for e in 0..20 {
        if generate(&env, e, None).unwrap() != generate(&env, e, None).unwrap() {
            return Err(format!("episode {e} regenerated differently"));
        }
    }
    let net = PolicyNetwork::build(
        PolicyTemplate::new(2, 4),
        InputSpec::new(NavSettings::default().dynamics.n_rays),
        OutputSpec::Discrete { actions: 25 },
        8,
    )
    .unwrap();
    let mut opts = EvalOptions::zero_latency(0.5);
    opts.record_trajectories = true;
    for e in eval_episode_indices(5) {
        let a = run_episode(&net, &NavSettings::default(), &env, e, &opts).unwrap();
        let b = run_episode(&net, &NavSettings::default(), &env, e, &opts).unwrap();
        if a != b {
            return Err(format!("trajectory of episode {e} differs"));
        }
    }
    opts.record_trajectories = false;
    opts.latency = LatencyModel::constant_t2(0.1, 0.5);
    let idx = eval_episode_indices(10);
    let ra = aggregate(&evaluate(&net, &NavSettings::default(), &env, &idx, &opts).unwrap(), "h", "c");
    let rb = aggregate(&evaluate(&net, &NavSettings::default(), &env, &idx, &opts).unwrap(), "h", "c");
    if ra != rb {
        return Err("reports differ".into());
    }

    let mut r = rng::stream(8, 0, 13);
    for _ in 0..100 {
        let env = EnvConfig {
            arena_size: [r.random_range(20.0..60.0), r.random_range(20.0..60.0), 5.0],
            num_static_obstacles: CountSpec::Fixed(r.random_range(0..8)),
            num_dynamic_obstacles: CountSpec::Fixed(r.random_range(0..4)),
            min_distance: r.random_range(0.5..4.0),
            seed: r.random(),
            ..EnvConfig::default()
        };
        audit(&env, r.random_range(0..1000))?;
    }
    Ok("environments, trajectories and reports bit-identical; 100 random configs pass audits".into())
}

// ---------------------------------------------------------------- 9

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        prop::collection::vec(any::<u8>(), 0..256).prop_map(Message::Ping),
        prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..64).prop_map(Message::Obs),
        (any::<u16>(), 1..u64::MAX).prop_map(|(id, t2)| Message::Act {
            action: WireAction::Discrete(id),
            t2_ns: t2
        }),
        prop::collection::vec(any::<u8>(), 0..256).prop_map(Message::LoadCkpt),
        (any::<u8>(), "[ -~]{0,40}").prop_map(|(c, reason)| Message::Err { code: c, reason }),
    ]
}

fn protocol() -> Outcome {
    let mut runner = TestRunner::new(RunnerConfig::with_cases(256));
    runner
        .run(&message(), |m| {
            prop_assert_eq!(Message::decode(&m.encode()).unwrap(), m);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let mut slowest = 0.0f64;
    for output in [OutputSpec::Discrete { actions: 25 }, OutputSpec::Gaussian { action_dim: 2 }] {
        let net = PolicyNetwork::build(PolicyTemplate::new(3, 8), InputSpec::new(16), output, 4).unwrap();
        let (addr, _h) = Server::spawn("127.0.0.1:0", Some(net.clone())).map_err(|e| e.to_string())?;
        let mut client = Client::connect(addr).map_err(|e| e.to_string())?;
        let mut r = rng::stream(1, 0, 14);
        for i in 0..1000 {
            let obs: Vec<f64> = (0..net.input.len()).map(|_| r.random_range(-20.0..20.0)).collect();
            let remote = client.infer(&obs).map_err(|e| e.to_string())?;
            let wire: Vec<f32> = obs.iter().map(|&v| v as f32).collect();
            let local = infer_local(&net, &wire)?;
            let same = match (remote.action, local) {
                (WireAction::Continuous(a), WireAction::Continuous(b)) => a.map(f32::to_bits) == b.map(f32::to_bits),
                (a, b) => a == b,
            };
            if !same {
                return Err(format!("observation {i}: remote {:?} vs local {local:?}", remote.action));
            }
            if remote.t2 > remote.round_trip {
                return Err(format!("t2 {} exceeds round trip {}", remote.t2, remote.round_trip));
            }
            slowest = slowest.max(remote.round_trip);
        }
    }
    Ok(format!(
        "256 round trips; 2000 loopback actions match local; t2 <= rtt (slowest rtt {:.2} ms)",
        slowest * 1000.0
    ))
}

// ---------------------------------------------------------------- 10

fn safe_velocity() -> Outcome {
    let mut r = rng::stream(7, 0, 15);
    for i in 0..1000 {
        let s = SafetyParams {
            a_brake: r.random_range(0.5..20.0),
            d_sense: r.random_range(0.5..100.0),
        };
        let v0 = max_safe_velocity(0.0, &s);
        let want = (2.0 * s.a_brake * s.d_sense).sqrt();
        let l1 = r.random_range(0.0..2.0);
        let l2 = l1 + r.random_range(1e-3..2.0);
        if (v0 - want).abs() > 1e-9 * want {
            return Err(format!("draw {i}: v(0) = {v0} vs {want}"));
        }
        if max_safe_velocity(l2, &s) >= max_safe_velocity(l1, &s) {
            return Err(format!("draw {i}: not decreasing between {l1} and {l2}"));
        }
    }
    Ok("1000 draws: v(0) = sqrt(2ad), strictly decreasing in latency".into())
}

// ----------------------------------------------------------------

fn main() {
    let dir = tempfile::tempdir().expect("scratch dir");
    let static_cfg = static_config();
    let mitigate_dir = dir.path().join("mitigate");
    let control = mitigate_dir.join("control").join("best.ckpt");

    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(gap_arithmetic)),
        (3, Box::new(|| mitigation(&static_cfg, &mitigate_dir))),
        (2, Box::new(|| degradation(&static_cfg, &control))),
        (6, Box::new(|| ablation(&static_cfg, &control))),
        (4, Box::new(|| learnability(&dir.path().join("open")))),
        (5, Box::new(|| curriculum(&dir.path().join("curriculum")))),
        (7, Box::new(numerical_core)),
        (8, Box::new(determinism)),
        (9, Box::new(protocol)),
        (10, Box::new(safe_velocity)),
    ];

    let mut lines = Vec::new();
    for (n, f) in &criteria {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let line = match &res {
            Ok(d) => format!("criterion {n}: PASS: {d} [{secs:.1} s]"),
            Err(d) => format!("criterion {n}: FAIL: {d} [{secs:.1} s]"),
        };
        println!("{line}");
        lines.push((*n, res.is_ok(), line));
    }

    lines.sort_by_key(|l| l.0);
    println!();
    for (_, _, line) in &lines {
        println!("{line}");
    }
    let passed = lines.iter().filter(|l| l.1).count();
    let unexpected: Vec<u32> = lines.iter().filter(|l| !l.1 && !KNOWN_FAILURES.contains(&l.0)).map(|l| l.0).collect();
    println!("{passed}/{} criteria passed", lines.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
