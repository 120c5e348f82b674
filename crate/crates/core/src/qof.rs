//! Quality-of-flight records, aggregation and hardware-gap arithmetic.
//!
//! Flight time, distance and energy are averaged over successful episodes
//! only; failed episodes have no completion time. Gaps between two reports
//! are relative percentages `(target - baseline) / baseline * 100`, except
//! success rate, which is reported in absolute percentage points
//! `baseline - target`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    StepExhausted,
    BatteryExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_index: u64,
    pub outcome: Outcome,
    /// Simulated seconds at termination.
    pub flight_time: f64,
    /// Path length, m.
    pub distance_flown: f64,
    /// Straight-line distance from the start to the edge of the goal region, m.
    pub straight_line: f64,
    pub energy_kj: f64,
    pub steps: u32,
    /// Mean `t1 + t2` per decision, ms.
    pub mean_latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
}

impl EpisodeRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QofReport {
    pub n_episodes: usize,
    pub n_success: usize,
    /// Percent of all episodes.
    pub success_rate: f64,
    /// Seconds, successful episodes only.
    pub flight_time: Option<MetricSummary>,
    /// Meters, successful episodes only.
    pub distance: Option<MetricSummary>,
    /// Kilojoules, successful episodes only.
    pub energy_kj: Option<MetricSummary>,
    /// Mean over every decision of every episode, ms.
    pub mean_latency_ms: f64,
    pub env_hash: String,
    pub checkpoint_id: String,
    /// Which episodes the QoF means cover.
    pub means_over: String,
}

/// Order-independent sum: sorts before adding so any permutation of the
/// same values yields bit-identical totals.
fn stable_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn summarize(values: Vec<f64>) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = stable_sum(values.clone()) / n;
    let var = stable_sum(values.iter().map(|v| (v - mean) * (v - mean)).collect()) / n;
    Some(MetricSummary { mean, std: sqrt(var) })
}

/// Partial aggregate that parallel evaluation workers can merge in any order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QofAccumulator {
    records: Vec<EpisodeRecord>,
}

impl QofAccumulator {
    pub fn push(&mut self, r: EpisodeRecord) {
        self.records.push(r);
    }

    pub fn merge(mut self, other: QofAccumulator) -> QofAccumulator {
        self.records.extend(other.records);
        self
    }

    pub fn finish(&self, env_hash: &str, checkpoint_id: &str) -> QofReport {
        aggregate(&self.records, env_hash, checkpoint_id)
    }
}

pub fn aggregate(records: &[EpisodeRecord], env_hash: &str, checkpoint_id: &str) -> QofReport {
    let n = records.len();
    let succ: Vec<&EpisodeRecord> = records.iter().filter(|r| r.is_success()).collect();
    let total_steps: u64 = records.iter().map(|r| r.steps as u64).sum();
    let lat_sum = stable_sum(records.iter().map(|r| r.mean_latency_ms * r.steps as f64).collect());
    QofReport {
        n_episodes: n,
        n_success: succ.len(),
        success_rate: if n == 0 { 0.0 } else { 100.0 * succ.len() as f64 / n as f64 },
        flight_time: summarize(succ.iter().map(|r| r.flight_time).collect()),
        distance: summarize(succ.iter().map(|r| r.distance_flown).collect()),
        energy_kj: summarize(succ.iter().map(|r| r.energy_kj).collect()),
        mean_latency_ms: if total_steps == 0 { 0.0 } else { lat_sum / total_steps as f64 },
        env_hash: env_hash.into(),
        checkpoint_id: checkpoint_id.into(),
        means_over: "successful_episodes".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub flight_time_pct: Option<f64>,
    pub distance_pct: Option<f64>,
    pub energy_pct: Option<f64>,
    pub latency_pct: Option<f64>,
    /// Absolute percentage points, `baseline - target`.
    pub success_rate_points: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("reports come from different environments ({baseline} vs {target})")]
    EnvMismatch { baseline: String, target: String },
}

/// `(target - baseline) / baseline * 100`; `None` when the baseline is zero.
pub fn relative_gap(baseline: f64, target: f64) -> Option<f64> {
    if baseline == 0.0 || !baseline.is_finite() || !target.is_finite() {
        None
    } else {
        Some((target - baseline) / baseline * 100.0)
    }
}

fn metric_gap(b: Option<MetricSummary>, t: Option<MetricSummary>) -> Option<f64> {
    relative_gap(b?.mean, t?.mean)
}

pub fn perf_gap(baseline: &QofReport, target: &QofReport) -> Result<GapReport, GapError> {
    if baseline.env_hash != target.env_hash {
        return Err(GapError::EnvMismatch {
            baseline: baseline.env_hash.clone(),
            target: target.env_hash.clone(),
        });
    }
    Ok(GapReport {
        flight_time_pct: metric_gap(baseline.flight_time, target.flight_time),
        distance_pct: metric_gap(baseline.distance, target.distance),
        energy_pct: metric_gap(baseline.energy_kj, target.energy_kj),
        latency_pct: relative_gap(baseline.mean_latency_ms, target.mean_latency_ms),
        success_rate_points: baseline.success_rate - target.success_rate,
    })
}

/// Gap columns with and without latency-aware training, and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub with_mitigation: GapReport,
    pub without_mitigation: GapReport,
    /// `|with| / |without|` per metric.
    pub flight_time_ratio: Option<f64>,
    pub distance_ratio: Option<f64>,
    pub energy_ratio: Option<f64>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    let (a, b) = (a?, b?);
    if b == 0.0 {
        None
    } else {
        Some(a.abs() / b.abs())
    }
}

impl MitigationReport {
    /// Each policy is compared against its own baseline report.
    pub fn from_pairs(
        with_baseline: &QofReport,
        with_target: &QofReport,
        without_baseline: &QofReport,
        without_target: &QofReport,
    ) -> Result<Self, GapError> {
        let with_mitigation = perf_gap(with_baseline, with_target)?;
        let without_mitigation = perf_gap(without_baseline, without_target)?;
        Ok(MitigationReport {
            flight_time_ratio: ratio(with_mitigation.flight_time_pct, without_mitigation.flight_time_pct),
            distance_ratio: ratio(with_mitigation.distance_pct, without_mitigation.distance_pct),
            energy_ratio: ratio(with_mitigation.energy_pct, without_mitigation.energy_pct),
            with_mitigation,
            without_mitigation,
        })
    }
}

/// Both gap columns measured against the same training-host report.
pub fn mitigation_report(
    train_host: &QofReport,
    target_with_mitigation: &QofReport,
    target_without: &QofReport,
) -> Result<MitigationReport, GapError> {
    MitigationReport::from_pairs(train_host, target_with_mitigation, train_host, target_without)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(i: u64, outcome: Outcome, t: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode_index: i,
            outcome,
            flight_time: t,
            distance_flown: t * 1.1,
            straight_line: t,
            energy_kj: t / 2.0,
            steps: 10,
            mean_latency_ms: 11.0,
            trajectory: None,
        }
    }

    fn report(time: f64, dist: f64, energy: f64, lat: f64, success: f64) -> QofReport {
        let m = |v| Some(MetricSummary { mean: v, std: 0.0 });
        QofReport {
            n_episodes: 100,
            n_success: success as usize,
            success_rate: success,
            flight_time: m(time),
            distance: m(dist),
            energy_kj: m(energy),
            mean_latency_ms: lat,
            env_hash: "h".into(),
            checkpoint_id: "c".into(),
            means_over: "successful_episodes".into(),
        }
    }

    #[test]
    fn success_rate_91_of_100() {
        let recs: Vec<EpisodeRecord> = (0..100)
            .map(|i| rec(i, if i < 91 { Outcome::Success } else { Outcome::Collision }, 20.0))
            .collect();
        assert_eq!(aggregate(&recs, "h", "c").success_rate, 91.0);
    }

    #[test]
    fn all_failures_have_no_means() {
        let recs = vec![rec(0, Outcome::Collision, 3.0), rec(1, Outcome::StepExhausted, 50.0)];
        let r = aggregate(&recs, "h", "c");
        assert_eq!(r.success_rate, 0.0);
        assert!(r.flight_time.is_none() && r.distance.is_none() && r.energy_kj.is_none());
    }

    #[test]
    fn singleton_mean() {
        let r = aggregate(&[rec(0, Outcome::Success, 25.29)], "h", "c");
        assert_eq!(r.flight_time.unwrap().mean, 25.29);
        assert_eq!(r.flight_time.unwrap().std, 0.0);
    }

    #[test]
    fn table_gaps_no_obstacles() {
        let b = report(25.29, 27.59, 19.68, 11.0, 91.0);
        let t = report(37.37, 33.06, 25.483, 396.0, 80.0);
        let g = perf_gap(&b, &t).unwrap();
        assert!((g.flight_time_pct.unwrap() - 47.76).abs() < 0.05);
        assert!((g.distance_pct.unwrap() - 19.82).abs() < 0.05);
        assert!((g.energy_pct.unwrap() - 29.48).abs() < 0.05);
        assert!((g.latency_pct.unwrap() - 3500.0).abs() < 0.05);
        assert!((g.success_rate_points - 11.0).abs() < 1e-12);
    }

    #[test]
    fn identical_reports_zero_gap() {
        let b = report(30.0, 28.0, 19.0, 10.0, 84.0);
        let g = perf_gap(&b, &b).unwrap();
        assert_eq!(g.flight_time_pct, Some(0.0));
        assert_eq!(g.distance_pct, Some(0.0));
        assert_eq!(g.energy_pct, Some(0.0));
        assert_eq!(g.latency_pct, Some(0.0));
        assert_eq!(g.success_rate_points, 0.0);
    }

    #[test]
    fn mismatched_env_rejected() {
        let b = report(30.0, 28.0, 19.0, 10.0, 84.0);
        let mut t = b.clone();
        t.env_hash = "other".into();
        assert!(matches!(perf_gap(&b, &t), Err(GapError::EnvMismatch { .. })));
    }

    #[test]
    fn mitigation_columns_against_training_host() {
        let host = report(32.62, 29.43, 24.59, 400.0, 85.0);
        let with = report(32.44, 29.031, 24.57, 396.0, 83.0);
        let without = report(44.93, 34.15, 28.40, 396.0, 73.0);
        let m = mitigation_report(&host, &with, &without).unwrap();
        assert!((m.without_mitigation.flight_time_pct.unwrap() - 37.73).abs() < 0.05);
        assert!((m.with_mitigation.flight_time_pct.unwrap().abs() - 0.5).abs() < 0.1);
        assert!((m.without_mitigation.distance_pct.unwrap() - 16.03).abs() < 0.05);
        assert!((m.with_mitigation.distance_pct.unwrap().abs() - 1.37).abs() < 0.05);
        assert!(m.flight_time_ratio.unwrap() < 0.05);
    }

    #[test]
    fn mitigation_equal_inputs_equal_columns() {
        let host = report(32.62, 29.43, 24.59, 400.0, 85.0);
        let t = report(40.0, 31.0, 26.0, 396.0, 80.0);
        let m = mitigation_report(&host, &t, &t).unwrap();
        assert_eq!(m.with_mitigation, m.without_mitigation);
        assert_eq!(m.flight_time_ratio, Some(1.0));
    }

    #[test]
    fn merge_order_independent() {
        let recs: Vec<EpisodeRecord> = (0..30)
            .map(|i| rec(i, if i % 3 == 0 { Outcome::Collision } else { Outcome::Success }, 10.0 + i as f64 * 0.37))
            .collect();
        let mut a = QofAccumulator::default();
        let mut b = QofAccumulator::default();
        for (i, r) in recs.iter().enumerate() {
            if i % 2 == 0 {
                a.push(r.clone())
            } else {
                b.push(r.clone())
            }
        }
        let ab = a.clone().merge(b.clone()).finish("h", "c");
        let ba = b.merge(a).finish("h", "c");
        assert_eq!(ab, ba);
        assert_eq!(ab, aggregate(&recs, "h", "c"));
    }
}
