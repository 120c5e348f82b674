//! Run directories, crash-resumable training and parallel evaluation.
//!
//! Layout of a training run:
//!
//! ```text
//! <out>/manifest.json
//! <out>/config.json              resolved config snapshot
//! <out>/train_log.csv            one row per episode
//! <out>/validation.csv           when selection is enabled
//! <out>/checkpoints/step_<n>.ckpt
//! <out>/zones/zone_<k>.ckpt      policy at each curriculum advance
//! <out>/final.ckpt
//! <out>/best.ckpt                when selection is enabled
//! ```

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use airgap_core::agents::{
    evaluate, normalized_reward_curve, run_episode, DqnTrainer, EpisodeLog, EvalOptions, NavSettings, PpoTrainer,
    Progress, TrainEvent, VALIDATION_EPISODE_BASE,
};
use airgap_core::envgen::EnvConfig;
use airgap_core::nn::{Adam, PolicyNetwork};
use airgap_core::qof::{aggregate, EpisodeRecord, Outcome, QofAccumulator, QofReport};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::{env_hash, Algo, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub outputs: Vec<String>,
    pub complete: bool,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn begin(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config,
            seeds,
            code_version: env!("CARGO_PKG_VERSION").into(),
            started_unix: unix_now(),
            finished_unix: None,
            outputs: Vec::new(),
            complete: false,
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn load(dir: &Path) -> Result<Option<Self>, CliError> {
        let p = Self::path(dir);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(p)?)?))
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        write_json(&Self::path(dir), self)
    }

    /// Marks the run finished; every listed output must exist.
    pub fn finish(&mut self, dir: &Path, outputs: Vec<String>) -> Result<(), CliError> {
        if let Some(missing) = outputs.iter().find(|o| !dir.join(o).exists()) {
            return Err(CliError::Other(format!("declared output {missing} was not written")));
        }
        self.outputs = outputs;
        self.finished_unix = Some(unix_now());
        self.complete = true;
        self.save(dir)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Returns true when `dir` already holds a completed run of the same
/// command and config, in which case the caller should do nothing.
pub fn already_complete(dir: &Path, command: &str, config: &serde_json::Value) -> Result<bool, CliError> {
    Ok(match RunManifest::load(dir)? {
        Some(m) if m.complete && m.command == command && &m.config == config => {
            log::info!("{} already holds a completed {command} run with this config; nothing to do", dir.display());
            true
        }
        _ => false,
    })
}

enum Trainer {
    Dqn(Box<DqnTrainer>),
    Ppo(Box<PpoTrainer>),
}

impl Trainer {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let setup = cfg.train_setup();
        Ok(match cfg.agent.algo {
            Algo::Dqn => Trainer::Dqn(Box::new(DqnTrainer::new(setup, cfg.agent.dqn.clone())?)),
            Algo::Ppo => Trainer::Ppo(Box::new(PpoTrainer::new(setup, cfg.agent.ppo.clone())?)),
        })
    }

    fn step(&mut self) -> Result<Vec<TrainEvent>, CliError> {
        Ok(match self {
            Trainer::Dqn(t) => t.step()?,
            Trainer::Ppo(t) => t.step()?,
        })
    }

    fn is_finished(&self) -> bool {
        match self {
            Trainer::Dqn(t) => t.is_finished(),
            Trainer::Ppo(t) => t.is_finished(),
        }
    }

    fn net(&self) -> &PolicyNetwork {
        match self {
            Trainer::Dqn(t) => &t.net,
            Trainer::Ppo(t) => &t.net,
        }
    }

    fn progress(&self) -> &Progress {
        match self {
            Trainer::Dqn(t) => &t.progress,
            Trainer::Ppo(t) => &t.progress,
        }
    }

    fn adam(&self) -> &Adam {
        match self {
            Trainer::Dqn(t) => &t.adam,
            Trainer::Ppo(t) => &t.adam,
        }
    }

    fn algo_name(&self) -> &'static str {
        match self {
            Trainer::Dqn(_) => "dqn",
            Trainer::Ppo(_) => "ppo",
        }
    }

    fn checkpoint(&self, env_hash: &str, seed: u64) -> Checkpoint {
        let p = self.progress();
        let adam = self.adam();
        let meta = CheckpointMeta {
            algo: self.algo_name().into(),
            step: p.global_step,
            zone: p.curriculum.zone,
            env_hash: env_hash.into(),
            seed,
            progress: Some(p.clone()),
            adam_t: adam.t,
        };
        let mut c = Checkpoint::new(self.net().clone(), meta)
            .with_array("adam_m", adam.m.clone())
            .with_array("adam_v", adam.v.clone());
        if let Trainer::Dqn(t) = self {
            c = c.with_array("target", t.target.params.clone());
        }
        c
    }

    fn restore(&mut self, c: Checkpoint) -> Result<(), CliError> {
        let bad = |what: &str| CliError::ResumeMismatch(format!("checkpoint lacks {what}"));
        if c.meta.algo != self.algo_name() {
            return Err(CliError::ResumeMismatch(format!(
                "checkpoint was trained with {}, config asks for {}",
                c.meta.algo,
                self.algo_name()
            )));
        }
        let progress = c.meta.progress.clone().ok_or_else(|| bad("trainer progress"))?;
        let mut adam = self.adam().clone();
        adam.m = c.array("adam_m").ok_or_else(|| bad("optimizer state"))?.to_vec();
        adam.v = c.array("adam_v").ok_or_else(|| bad("optimizer state"))?.to_vec();
        adam.t = c.meta.adam_t;
        if adam.m.len() != c.net.params.len() || adam.v.len() != c.net.params.len() {
            return Err(bad("consistent optimizer state"));
        }
        match self {
            Trainer::Dqn(t) => {
                let mut target = c.net.clone();
                target.params = c.array("target").ok_or_else(|| bad("target network"))?.to_vec();
                t.restore(c.net, target, adam, progress)?;
            }
            Trainer::Ppo(t) => t.restore(c.net, adam, progress)?,
        }
        Ok(())
    }
}

fn step_checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("step_{step}.ckpt"))
}

/// Highest-step checkpoint in `<dir>/checkpoints`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<(u64, PathBuf)>, CliError> {
    let ck = dir.join("checkpoints");
    if !ck.exists() {
        return Ok(None);
    }
    let mut best = None;
    for e in fs::read_dir(ck)? {
        let p = e?.path();
        let step = p
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|n| n.strip_suffix(".ckpt"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(s) = step {
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, p));
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogRow {
    episode: u64,
    global_step: u64,
    steps: u32,
    reward: f64,
    normalized_reward: Option<f64>,
    outcome: Outcome,
    zone: u8,
    energy_kj: f64,
}

impl From<&EpisodeLog> for LogRow {
    fn from(l: &EpisodeLog) -> Self {
        LogRow {
            episode: l.episode,
            global_step: l.global_step,
            steps: l.steps,
            reward: l.reward,
            normalized_reward: None,
            outcome: l.outcome,
            zone: l.zone,
            energy_kj: l.energy_kj,
        }
    }
}

/// Rolling window of the normalized training reward curve.
pub const REWARD_WINDOW: usize = 100;

fn read_log(path: &Path) -> Result<Vec<LogRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

fn write_log(path: &Path, rows: &[LogRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub step: u64,
    pub success_rate: f64,
    pub mean_flight_time: Option<f64>,
}

impl ValidationRow {
    /// Higher success wins; ties go to the faster policy.
    fn beats(&self, other: &ValidationRow) -> bool {
        if self.success_rate != other.success_rate {
            return self.success_rate > other.success_rate;
        }
        match (self.mean_flight_time, other.mean_flight_time) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Greedy success on held-out validation episodes under the training
/// latency.
fn validate_policy(net: &PolicyNetwork, cfg: &RunConfig, step: u64) -> Result<ValidationRow, CliError> {
    let n = cfg.agent.selection.episodes as u64;
    let episodes: Vec<u64> = (0..n).map(|i| VALIDATION_EPISODE_BASE + i).collect();
    let mut opts = EvalOptions::zero_latency(cfg.dynamics.t3);
    if let Some(l) = &cfg.latency {
        opts.latency = l.clone();
    }
    opts.latency_seed = cfg.agent.seed;
    let recs = evaluate(net, &cfg.settings(), &cfg.env, &episodes, &opts)?;
    let r = aggregate(&recs, "", "");
    Ok(ValidationRow {
        step,
        success_rate: r.success_rate,
        mean_flight_time: r.flight_time.map(|m| m.mean),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub final_step: u64,
    pub episodes: u64,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
    pub best_validation: Option<ValidationRow>,
    /// Nothing was done because the run was already complete.
    pub noop: bool,
}

impl TrainSummary {
    /// Best checkpoint when selection ran, otherwise the final one.
    pub fn policy(&self) -> &Path {
        self.best_checkpoint.as_deref().unwrap_or(&self.final_checkpoint)
    }
}

/// Trains into `dir`. With `resume`, continues from the latest step
/// checkpoint of a previous run with the same config.
pub fn train(cfg: &RunConfig, dir: &Path, resume: bool) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    let snapshot = serde_json::to_value(cfg)?;
    let final_path = dir.join("final.ckpt");
    let best_path = dir.join("best.ckpt");
    let selection = cfg.agent.selection.every > 0;
    if already_complete(dir, "train", &snapshot)? {
        let c = Checkpoint::load(&final_path)?;
        let best = selection.then(|| best_path.clone()).filter(|p| p.exists());
        return Ok(TrainSummary {
            final_step: c.meta.step,
            episodes: c.meta.progress.map_or(0, |p| p.episode),
            final_checkpoint: final_path,
            best_checkpoint: best,
            best_validation: None,
            noop: true,
        });
    }
    let ehash = env_hash(&cfg.env);
    let mut trainer = Trainer::new(cfg)?;
    let log_path = dir.join("train_log.csv");
    let val_path = dir.join("validation.csv");
    let mut rows = Vec::new();
    let mut validations: Vec<ValidationRow> = Vec::new();

    if resume {
        let prev: RunConfig = serde_json::from_value(crate::config::read_json(&dir.join("config.json"))?)
            .map_err(|e| CliError::ResumeMismatch(format!("unreadable config snapshot: {e}")))?;
        if prev.agent.template != cfg.agent.template || prev.agent.algo != cfg.agent.algo {
            return Err(CliError::ResumeMismatch(format!(
                "run was {:?} {}, config asks for {:?} {}",
                prev.agent.algo, prev.agent.template, cfg.agent.algo, cfg.agent.template
            )));
        }
        if let Some((step, path)) = latest_checkpoint(dir)? {
            let c = Checkpoint::load(&path)?;
            if c.meta.env_hash != ehash {
                return Err(CliError::ResumeMismatch("environment config changed since the checkpoint".into()));
            }
            trainer.restore(c)?;
            let episode = trainer.progress().episode;
            rows = read_log(&log_path)?;
            rows.retain(|r: &LogRow| r.episode < episode);
            if val_path.exists() {
                let mut r = csv::Reader::from_path(&val_path)?;
                for v in r.deserialize() {
                    let v: ValidationRow = v?;
                    if v.step <= step {
                        validations.push(v);
                    }
                }
            }
            log::info!("resuming from step {step}, episode {episode}");
        } else {
            log::info!("no checkpoint to resume from; starting fresh");
        }
    } else {
        for sub in ["checkpoints", "zones"] {
            let p = dir.join(sub);
            if p.exists() {
                fs::remove_dir_all(p)?;
            }
        }
        for f in [&final_path, &best_path, &log_path, &val_path] {
            if f.exists() {
                fs::remove_file(f)?;
            }
        }
    }

    fs::create_dir_all(dir.join("checkpoints"))?;
    let mut manifest = RunManifest::begin("train", snapshot.clone(), vec![cfg.agent.seed, cfg.env.seed]);
    manifest.save(dir)?;
    write_json(&dir.join("config.json"), &snapshot)?;

    let mut log_writer = csv::Writer::from_writer(BufWriter::new(fs::File::create(&log_path)?));
    for r in &rows {
        log_writer.serialize(r)?;
    }
    let mut best = validations
        .iter()
        .copied()
        .reduce(|a, b| if b.beats(&a) { b } else { a });

    while !trainer.is_finished() {
        let events = trainer.step()?;
        let step = trainer.progress().global_step;
        // validate before this step's checkpoint so a resume never repeats it
        if selection && step % cfg.agent.selection.every == 0 && !validations.iter().any(|v| v.step == step) {
            validate_and_keep(&trainer, cfg, step, &ehash, &best_path, &val_path, &mut validations, &mut best)?;
        }
        for ev in events {
            match ev {
                TrainEvent::Episode(l) => {
                    let row = LogRow::from(&l);
                    log_writer.serialize(&row)?;
                    if l.episode % 100 == 0 {
                        log::info!(
                            "episode {} step {} reward {:.1} {:?} zone {}",
                            l.episode,
                            l.global_step,
                            l.reward,
                            l.outcome,
                            l.zone
                        );
                    }
                    rows.push(row);
                }
                TrainEvent::ZoneAdvanced(adv) => {
                    let p = dir.join("zones").join(format!("zone_{}.ckpt", adv.completed_zone));
                    trainer.checkpoint(&ehash, cfg.agent.seed).save(&p)?;
                    log::info!("curriculum zone {} completed; now zone {}", adv.completed_zone, adv.zone);
                }
                TrainEvent::Checkpoint { step } => {
                    log_writer.flush()?;
                    trainer.checkpoint(&ehash, cfg.agent.seed).save(&step_checkpoint_path(dir, step))?;
                }
            }
        }
    }
    log_writer.flush()?;
    drop(log_writer);

    let final_ckpt = trainer.checkpoint(&ehash, cfg.agent.seed);
    let final_step = final_ckpt.meta.step;
    final_ckpt.save(&step_checkpoint_path(dir, final_step))?;
    final_ckpt.save(&final_path)?;

    let curve = normalized_reward_curve(&rows.iter().map(|r| r.reward).collect::<Vec<_>>(), REWARD_WINDOW);
    for (r, n) in rows.iter_mut().zip(curve) {
        r.normalized_reward = Some(n);
    }
    write_log(&log_path, &rows)?;

    let mut outputs = vec![
        "config.json".to_string(),
        "train_log.csv".into(),
        "final.ckpt".into(),
        format!("checkpoints/step_{final_step}.ckpt"),
    ];
    if selection && best_path.exists() {
        outputs.push("best.ckpt".into());
        outputs.push("validation.csv".into());
    }
    manifest.finish(dir, outputs)?;
    Ok(TrainSummary {
        final_step,
        episodes: trainer.progress().episode,
        final_checkpoint: final_path,
        best_checkpoint: (selection && best_path.exists()).then_some(best_path),
        best_validation: best,
        noop: false,
    })
}

#[allow(clippy::too_many_arguments)]
fn validate_and_keep(
    trainer: &Trainer,
    cfg: &RunConfig,
    step: u64,
    ehash: &str,
    best_path: &Path,
    val_path: &Path,
    validations: &mut Vec<ValidationRow>,
    best: &mut Option<ValidationRow>,
) -> Result<(), CliError> {
    let v = validate_policy(trainer.net(), cfg, step)?;
    log::info!("validation at step {step}: success {:.1}%", v.success_rate);
    if best.as_ref().is_none_or(|b| v.beats(b)) {
        trainer.checkpoint(ehash, cfg.agent.seed).save(best_path)?;
        *best = Some(v);
    }
    validations.push(v);
    let mut w = csv::Writer::from_path(val_path)?;
    for r in validations.iter() {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates `episodes` across `workers` threads; records come back in
/// episode order regardless of the worker count.
pub fn evaluate_parallel(
    net: &PolicyNetwork,
    settings: &NavSettings,
    env: &EnvConfig,
    episodes: &[u64],
    opts: &EvalOptions,
    workers: usize,
    trajectory_dir: Option<&Path>,
) -> Result<Vec<EpisodeRecord>, CliError> {
    if let Some(d) = trajectory_dir {
        fs::create_dir_all(d)?;
    }
    let mut opts = opts.clone();
    opts.record_trajectories = trajectory_dir.is_some();
    let workers = workers.clamp(1, episodes.len().max(1));
    let chunk = episodes.len().div_ceil(workers).max(1);
    let one = |e: u64| -> Result<EpisodeRecord, CliError> {
        let (mut rec, traj) = run_episode(net, settings, env, e, &opts)?;
        if let (Some(d), Some(rows)) = (trajectory_dir, traj) {
            let name = format!("episode_{e}.csv");
            crate::trajectory::write_csv(BufWriter::new(fs::File::create(d.join(&name))?), &rows)?;
            rec.trajectory = Some(name);
        }
        Ok(rec)
    };
    let parts: Vec<Result<Vec<EpisodeRecord>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = episodes
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(|&e| one(e)).collect::<Result<Vec<_>, _>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Other("evaluation worker panicked".into()))))
            .collect()
    });
    let mut out = Vec::with_capacity(episodes.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Per-worker accumulators merged into one report.
pub fn report_from_records(records: &[EpisodeRecord], env_hash: &str, checkpoint_id: &str) -> QofReport {
    let mut acc = QofAccumulator::default();
    for r in records {
        acc.push(r.clone());
    }
    acc.finish(env_hash, checkpoint_id)
}

pub fn write_episode_csv(path: &Path, records: &[EpisodeRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    w.write_record([
        "episode_index",
        "outcome",
        "flight_time",
        "distance_flown",
        "straight_line",
        "energy_kj",
        "steps",
        "mean_latency_ms",
        "trajectory",
    ])?;
    for r in records {
        w.write_record([
            r.episode_index.to_string(),
            serde_json::to_value(r.outcome)?.as_str().unwrap_or_default().to_string(),
            r.flight_time.to_string(),
            r.distance_flown.to_string(),
            r.straight_line.to_string(),
            r.energy_kj.to_string(),
            r.steps.to_string(),
            r.mean_latency_ms.to_string(),
            r.trajectory.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
