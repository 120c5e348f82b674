//! Latency trace files and the `--latency` flag.
//!
//! A trace is JSON `{"kind", "unit": "seconds", "t1_samples", "t2_samples",
//! "t3"}`. `kind` is informational ("profile", "constant", ...); sampling
//! always draws uniformly from the stored lists.

use std::path::Path;

use airgap_core::latency::{LatencyDist, LatencyModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyTrace {
    pub kind: String,
    pub unit: String,
    pub t1_samples: Vec<f64>,
    pub t2_samples: Vec<f64>,
    pub t3: f64,
}

impl LatencyTrace {
    pub fn new(kind: &str, t1_samples: Vec<f64>, t2_samples: Vec<f64>, t3: f64) -> Self {
        LatencyTrace {
            kind: kind.into(),
            unit: "seconds".into(),
            t1_samples,
            t2_samples,
            t3,
        }
    }

    pub fn to_model(&self) -> Result<LatencyModel, CliError> {
        if self.unit != "seconds" {
            return Err(CliError::Config(format!("trace unit {:?} is not \"seconds\"", self.unit)));
        }
        let dist = |v: &[f64]| {
            if v.is_empty() {
                LatencyDist::zero()
            } else {
                LatencyDist::Empirical { samples: v.to_vec() }
            }
        };
        let m = LatencyModel {
            t1: dist(&self.t1_samples),
            t2: dist(&self.t2_samples),
            t3: self.t3,
        };
        m.validate().map_err(|e| CliError::Config(format!("trace: {e}")))?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let v = crate::config::read_json(path)?;
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Parses `constant:<ms>`, `trace:<file>` or `gaussian:<mu_ms>,<sigma_ms>`
/// into a model whose inference delay follows the flag; `t3` is the
/// actuation duration.
pub fn parse_latency_flag(spec: &str, t3: f64) -> Result<LatencyModel, CliError> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("latency {spec:?}: expected kind:value")))?;
    let ms = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("latency {spec:?}: {s:?} is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Config(format!("latency {spec:?}: values must be non-negative")));
        }
        Ok(v / 1000.0)
    };
    match kind {
        "constant" => Ok(LatencyModel::constant_t2(ms(arg)?, t3)),
        "gaussian" => {
            let (mu, sigma) = arg
                .split_once(',')
                .ok_or_else(|| CliError::Config(format!("latency {spec:?}: expected gaussian:<mu>,<sigma>")))?;
            Ok(LatencyModel {
                t1: LatencyDist::zero(),
                t2: LatencyDist::Gaussian {
                    mean: ms(mu)?,
                    std: ms(sigma)?,
                },
                t3,
            })
        }
        "trace" => LatencyTrace::load(Path::new(arg))?.to_model(),
        other => Err(CliError::Config(format!("unknown latency kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_forms() {
        let m = parse_latency_flag("constant:300", 0.5).unwrap();
        assert_eq!(m.t2, LatencyDist::Constant { value: 0.3 });
        let m = parse_latency_flag("gaussian:150,20", 0.5).unwrap();
        assert_eq!(m.t2, LatencyDist::Gaussian { mean: 0.15, std: 0.02 });
        assert!(parse_latency_flag("constant:-1", 0.5).is_err());
        assert!(parse_latency_flag("uniform:3", 0.5).is_err());
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("latency.json");
        let t = LatencyTrace::new("profile", vec![0.001], vec![0.3, 0.4, 0.5], 0.5);
        t.save(&p).unwrap();
        let m = parse_latency_flag(&format!("trace:{}", p.display()), 0.5).unwrap();
        assert_eq!(m.t2, LatencyDist::Empirical { samples: vec![0.3, 0.4, 0.5] });
        assert_eq!(m.response_latency(), 0.001 + 0.5 + 0.5);
    }

    #[test]
    fn empty_samples_are_zero() {
        let t = LatencyTrace::new("constant", vec![], vec![0.396], 0.5);
        let m = t.to_model().unwrap();
        assert_eq!(m.t1, LatencyDist::zero());
    }
}
