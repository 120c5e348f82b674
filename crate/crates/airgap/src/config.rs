//! The single top-level JSON config: sections `env`, `energy`, `dynamics`,
//! `agent`, `latency` and `safety`. A bare environment document (Table-style
//! keys at the top level) is accepted wherever a full config is.

use std::path::Path;

use airgap_core::agents::curriculum::CURRICULUM_WINDOW;
use airgap_core::agents::{DqnConfig, NavSettings, PpoConfig, TrainSetup};
use airgap_core::dynamics::{ActionMapping, DynamicsParams};
use airgap_core::energy::EnergyCoefficients;
use airgap_core::envgen::{ConfigError, EnvConfig};
use airgap_core::latency::{LatencyModel, SafetyParams};
use airgap_core::nn::PolicyTemplate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Keys accepted for fidelity with the original generator but without effect.
pub const INERT_ENV_KEYS: [&str; 3] = ["asset", "materials", "textures"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    #[default]
    Dqn,
    Ppo,
}

/// Periodic greedy evaluation on held-out validation episodes; the best
/// policy seen is written to `best.ckpt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Selection {
    /// Steps between validations; 0 disables.
    pub every: u64,
    pub episodes: usize,
}

impl Default for Selection {
    fn default() -> Self {
        Selection {
            every: 0,
            episodes: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub algo: Algo,
    #[serde(with = "template_str")]
    pub template: PolicyTemplate,
    pub curriculum: bool,
    /// Episodes in the rolling success window that gates zone advances.
    pub curriculum_window: usize,
    pub seed: u64,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub selection: Selection,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algo: Algo::Dqn,
            template: PolicyTemplate::new(5, 32),
            curriculum: false,
            curriculum_window: CURRICULUM_WINDOW,
            seed: 0,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            selection: Selection::default(),
        }
    }
}

impl AgentConfig {
    pub fn total_steps(&self) -> u64 {
        match self.algo {
            Algo::Dqn => self.dqn.total_steps,
            Algo::Ppo => self.ppo.total_steps,
        }
    }

    pub fn set_total_steps(&mut self, n: u64) {
        self.dqn.total_steps = n;
        self.ppo.total_steps = n;
    }
}

mod template_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &PolicyTemplate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PolicyTemplate, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            Obj { num_layers: usize, num_filters: usize },
        }
        match Repr::deserialize(d)? {
            Repr::Str(s) => parse_template(&s).map_err(serde::de::Error::custom),
            Repr::Obj {
                num_layers,
                num_filters,
            } => Ok(PolicyTemplate::new(num_layers, num_filters)),
        }
    }
}

/// Parses `"<layers>x<filters>"`, e.g. `5x32`.
pub fn parse_template(s: &str) -> Result<PolicyTemplate, String> {
    let (l, f) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("template {s:?} is not of the form LxF"))?;
    let l: usize = l.trim().parse().map_err(|_| format!("bad layer count in {s:?}"))?;
    let f: usize = f.trim().parse().map_err(|_| format!("bad filter count in {s:?}"))?;
    if l == 0 || f == 0 {
        return Err(format!("template {s:?} must have at least one layer and one filter"));
    }
    Ok(PolicyTemplate::new(l, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub energy: EnergyCoefficients,
    pub dynamics: DynamicsParams,
    pub actions: ActionMapping,
    pub agent: AgentConfig,
    /// Latency injected during training.
    pub latency: Option<LatencyModel>,
    pub safety: SafetyParams,
}

impl RunConfig {
    pub fn settings(&self) -> NavSettings {
        NavSettings {
            dynamics: self.dynamics,
            energy: self.energy,
            mapping: self.actions,
        }
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            env: self.env.clone(),
            settings: self.settings(),
            template: self.agent.template,
            curriculum: self.agent.curriculum,
            curriculum_window: self.agent.curriculum_window,
            latency: self.latency.clone(),
            seed: self.agent.seed,
        }
    }

    /// Applies the `AIRGAP_SEED` override to the agent and environment seeds.
    pub fn apply_seed_override(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.agent.seed = s;
            self.env.seed = s;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.env.validate().map_err(env_errors)?;
        if let Some(l) = &self.latency {
            l.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let d = &self.dynamics;
        if !(d.dt_phys > 0.0 && d.a_max > 0.0 && d.r_agent >= 0.0 && d.max_range > 0.0 && d.t3 > 0.0) {
            return Err(CliError::Config("dynamics parameters must be positive".into()));
        }
        if !(self.safety.a_brake > 0.0 && self.safety.d_sense > 0.0) {
            return Err(CliError::Config("safety parameters must be positive".into()));
        }
        if self.agent.curriculum_window == 0 {
            return Err(CliError::Config("curriculum_window must be positive".into()));
        }
        let ok = match self.agent.algo {
            Algo::Dqn => self.agent.dqn.validate(),
            Algo::Ppo => self.agent.ppo.validate(),
        };
        ok.map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn env_errors(errs: Vec<ConfigError>) -> CliError {
    CliError::Config(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))
}

/// Checks a raw environment document before typed parsing, so negative
/// counts and other sign errors are reported by name instead of as a
/// generic type error. Inert keys are logged and removed.
pub fn validate_env_value(v: &mut Value) -> Vec<ConfigError> {
    let mut errs = Vec::new();
    let Some(obj) = v.as_object_mut() else {
        errs.push(ConfigError::InvalidValue {
            key: "env",
            reason: "expected a JSON object",
        });
        return errs;
    };
    for key in INERT_ENV_KEYS {
        if obj.remove(key).is_some() {
            log::info!("config key `{key}` has no effect in the renderless simulator; ignored");
        }
    }
    for (key, name) in [
        ("num_static_obstacles", "num_static_obstacles"),
        ("num_dynamic_obstacles", "num_dynamic_obstacles"),
    ] {
        let negative = match obj.get(key) {
            Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x < 0.0),
            Some(Value::Array(a)) => a.iter().any(|x| x.as_f64().is_some_and(|x| x < 0.0)),
            _ => false,
        };
        if negative {
            errs.push(ConfigError::NegativeCount(name));
        }
    }
    if obj.get("seed").and_then(Value::as_f64).is_some_and(|s| s < 0.0) {
        errs.push(ConfigError::InvalidValue {
            key: "seed",
            reason: "must be non-negative",
        });
    }
    if obj.get("max_decision_steps").and_then(Value::as_f64).is_some_and(|s| s < 0.0) {
        errs.push(ConfigError::ZeroStepBudget);
    }
    if let Some(Value::Array(c)) = obj.get("wall_colors") {
        if c.iter().any(|x| !x.as_f64().is_some_and(|x| (0.0..=255.0).contains(&x))) {
            errs.push(ConfigError::WallColorRange);
        }
    }
    errs
}

/// Raw document to a fully defaulted, validated environment config.
pub fn parse_env_config(mut v: Value) -> Result<EnvConfig, CliError> {
    let mut errs = validate_env_value(&mut v);
    if !errs.is_empty() {
        if let Ok(cfg) = serde_json::from_value::<EnvConfig>(v) {
            if let Err(more) = cfg.validate() {
                errs.extend(more);
            }
        }
        return Err(env_errors(errs));
    }
    let cfg: EnvConfig = serde_json::from_value(v).map_err(|e| CliError::Config(format!("env: {e}")))?;
    cfg.validate().map_err(env_errors)?;
    Ok(cfg)
}

/// Top-level keys that mark a document as a full run config.
pub const SECTIONS: [&str; 7] = ["env", "energy", "dynamics", "actions", "agent", "latency", "safety"];

pub fn parse_run_config(mut v: Value) -> Result<RunConfig, CliError> {
    if !SECTIONS.iter().any(|k| v.get(k).is_some()) {
        let env = parse_env_config(v)?;
        return Ok(RunConfig {
            env,
            ..RunConfig::default()
        });
    }
    let obj = v
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    let env = match obj.remove("env") {
        Some(e) => parse_env_config(e)?,
        None => EnvConfig::default(),
    };
    let mut cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.env = env;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    parse_run_config(read_json(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Identifies an environment config; reports are only comparable when their
/// hashes match.
pub fn env_hash(env: &EnvConfig) -> String {
    let json = serde_json::to_vec(env).expect("env config serializes");
    sha256_hex(&json)[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = parse_env_config(json!({"arena_size": [25, 25, 5], "seed": 7})).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.num_static_obstacles, airgap_core::envgen::CountSpec::Fixed(0));
        assert_eq!(cfg.goal_position, airgap_core::envgen::GoalSpec::default());
    }

    #[test]
    fn obstacle_range_policy_accepted() {
        let cfg = parse_env_config(json!({"arena_size": [50, 50, 5], "num_static_obstacles": [5, 10]})).unwrap();
        assert_eq!(cfg.num_static_obstacles.bounds(), (5, 10));
    }

    #[test]
    fn named_errors() {
        let e = parse_env_config(json!({"velocity": [2.5, 1.0]})).unwrap_err();
        assert!(e.to_string().contains("velocity range unordered"), "{e}");
        let e = parse_env_config(json!({"num_static_obstacles": -3})).unwrap_err();
        assert!(e.to_string().contains("num_static_obstacles must be non-negative"), "{e}");
        let e = parse_env_config(json!({"arena_size": [0, 25, 5]})).unwrap_err();
        assert!(e.to_string().contains("arena dimensions"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn inert_keys_ignored() {
        let cfg = parse_env_config(json!({"asset": "drone", "materials": ["m"], "textures": 3})).unwrap();
        assert_eq!(cfg, EnvConfig::default());
    }

    #[test]
    fn full_config_sections() {
        let cfg = parse_run_config(json!({
            "env": {"num_static_obstacles": 4},
            "agent": {"algo": "ppo", "template": "3x16", "seed": 9},
            "latency": {"t1": {"kind": "constant", "value": 0.0}, "t2": {"kind": "constant", "value": 0.15}, "t3": 0.5}
        }))
        .unwrap();
        assert_eq!(cfg.agent.algo, Algo::Ppo);
        assert_eq!(cfg.agent.template, PolicyTemplate::new(3, 16));
        assert_eq!(cfg.latency.unwrap().t2.mean(), 0.15);
    }

    #[test]
    fn template_strings() {
        assert_eq!(parse_template("5x32").unwrap(), PolicyTemplate::new(5, 32));
        assert!(parse_template("0x32").is_err());
        assert!(parse_template("5-32").is_err());
    }
}
