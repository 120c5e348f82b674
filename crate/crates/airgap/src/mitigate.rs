//! Latency-aware training against a target compute platform, in three
//! phases: capture the target's latency distribution, train with delays
//! drawn from it and a velocity-capped action space, then deploy under the
//! target latency next to a control policy trained without either.

use std::path::{Path, PathBuf};

use airgap_core::agents::{eval_episode_indices, EvalOptions};
use airgap_core::latency::{max_safe_velocity, scale_action_space, LatencyModel};
use airgap_core::qof::{MitigationReport, QofReport};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{env_hash, RunConfig};
use crate::error::CliError;
use crate::hilnet::Client;
use crate::profile::{profile_inference, Transport};
use crate::run::{evaluate_parallel, report_from_records, train, write_json, RunManifest};
use crate::trace::LatencyTrace;

/// Profiling samples captured from a remote target.
pub const PROFILE_SAMPLES: usize = 1000;

pub enum Target {
    Trace(LatencyTrace),
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReportFile {
    /// Worst-case observation-to-actuation time of the target, s.
    pub response_latency: f64,
    /// Safe speed for that latency, m/s.
    pub v_cap: f64,
    /// Speed limit actually applied to the mitigated action space.
    pub applied_speed_limit: f64,
    pub mitigated_baseline: QofReport,
    pub mitigated_target: QofReport,
    pub control_baseline: QofReport,
    pub control_target: QofReport,
    pub report: MitigationReport,
}

pub struct MitigateOptions {
    pub eval_episodes: usize,
    pub workers: usize,
    pub resume: bool,
}

/// Phase 1: the target's latency trace.
fn capture(target: Target, cfg: &RunConfig) -> Result<LatencyTrace, CliError> {
    match target {
        Target::Trace(t) => Ok(t),
        Target::Remote(addr) => {
            let net = airgap_core::nn::PolicyNetwork::build(
                cfg.agent.template,
                cfg.train_setup().input_spec(),
                output_spec(cfg),
                cfg.agent.seed,
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            let mut client = Client::connect(addr.as_str())?;
            client.load_checkpoint(&Checkpoint::new(net.clone(), Default::default()).to_bytes())?;
            profile_inference(
                &net,
                PROFILE_SAMPLES,
                Transport::Remote(&mut client),
                cfg.dynamics.max_range,
                cfg.dynamics.t3,
                cfg.agent.seed,
            )
        }
    }
}

fn output_spec(cfg: &RunConfig) -> airgap_core::nn::OutputSpec {
    use airgap_core::nn::OutputSpec;
    match cfg.agent.algo {
        crate::config::Algo::Dqn => OutputSpec::Discrete {
            actions: airgap_core::dynamics::NUM_DISCRETE_ACTIONS,
        },
        crate::config::Algo::Ppo => OutputSpec::Gaussian { action_dim: 2 },
    }
}

/// Evaluates a checkpoint on the shared episodes under `latency`.
pub fn evaluate_checkpoint(
    path: &Path,
    cfg: &RunConfig,
    latency: &LatencyModel,
    episodes: usize,
    workers: usize,
) -> Result<QofReport, CliError> {
    let c = Checkpoint::load_for(path, cfg.train_setup().input_spec())?;
    let mut opts = EvalOptions::zero_latency(cfg.dynamics.t3);
    opts.latency = latency.clone();
    opts.latency_seed = cfg.agent.seed;
    let recs = evaluate_parallel(
        &c.net,
        &cfg.settings(),
        &cfg.env,
        &eval_episode_indices(episodes),
        &opts,
        workers,
        None,
    )?;
    Ok(report_from_records(&recs, &env_hash(&cfg.env), &c.id()))
}

pub fn mitigate(cfg: &RunConfig, target: Target, dir: &Path, opts: &MitigateOptions) -> Result<GapReportFile, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut manifest = RunManifest::begin("mitigate", serde_json::to_value(cfg)?, vec![cfg.agent.seed, cfg.env.seed]);
    manifest.save(dir)?;

    log::info!("phase 1: capturing target latency");
    let trace = capture(target, cfg)?;
    trace.save(&dir.join("latency.json"))?;
    let target_model = trace.to_model()?;
    let response = target_model.response_latency();
    let v_cap = max_safe_velocity(response, &cfg.safety);
    let limit = v_cap.min(cfg.actions.max_speed());
    if !(limit > 0.0) {
        return Err(CliError::Config(format!(
            "target latency {response:.3} s leaves no safe speed"
        )));
    }
    log::info!("response latency {response:.3} s, safe speed {v_cap:.2} m/s, applied limit {limit:.2} m/s");

    log::info!("phase 2: latency-aware training");
    let mut mitigated = cfg.clone();
    mitigated.latency = Some(target_model.clone());
    mitigated.actions = scale_action_space(&cfg.actions, limit);
    let m_run = train(&mitigated, &dir.join("mitigated"), opts.resume)?;
    let mut control = cfg.clone();
    control.latency = None;
    let c_run = train(&control, &dir.join("control"), opts.resume)?;

    log::info!("phase 3: deployment under the target latency");
    let zero = LatencyModel::zero(cfg.dynamics.t3);
    let mitigated_baseline = evaluate_checkpoint(m_run.policy(), &mitigated, &zero, opts.eval_episodes, opts.workers)?;
    let mitigated_target = evaluate_checkpoint(m_run.policy(), &mitigated, &target_model, opts.eval_episodes, opts.workers)?;
    let control_baseline = evaluate_checkpoint(c_run.policy(), &control, &zero, opts.eval_episodes, opts.workers)?;
    let control_target = evaluate_checkpoint(c_run.policy(), &control, &target_model, opts.eval_episodes, opts.workers)?;
    let report = MitigationReport::from_pairs(&mitigated_baseline, &mitigated_target, &control_baseline, &control_target)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let out = GapReportFile {
        response_latency: response,
        v_cap,
        applied_speed_limit: limit,
        mitigated_baseline,
        mitigated_target,
        control_baseline,
        control_target,
        report,
    };
    write_json(&dir.join("gap_report.json"), &out)?;
    manifest.finish(
        dir,
        vec![
            "latency.json".into(),
            "gap_report.json".into(),
            rel(dir, m_run.policy()),
            rel(dir, c_run.policy()),
        ],
    )?;
    Ok(out)
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).map(PathBuf::from).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}
