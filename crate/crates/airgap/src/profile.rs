//! Phase-1 latency capture: time policy inference in process or on a remote
//! server, and sweep network sizes.

use std::io::Write;
use std::time::Instant;

use airgap_core::agents::greedy_action;
use airgap_core::nn::{AblationMask, InputSpec, OutputSpec, PolicyNetwork, PolicyTemplate};
use airgap_core::rng::{self, tag};
use rand::Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::hilnet::Client;
use crate::trace::LatencyTrace;

/// Samples dropped before recording.
pub const WARMUP: usize = 10;

pub enum Transport<'a> {
    InProcess,
    Remote(&'a mut Client),
}

/// Random observation within the sensor ranges.
pub fn random_observation<R: Rng + ?Sized>(spec: &InputSpec, max_range: f64, rng: &mut R) -> Vec<f64> {
    let mut x = Vec::with_capacity(spec.len());
    x.extend((0..spec.n_rays).map(|_| rng.random_range(0.0..=max_range)));
    x.extend((0..spec.vel_len).map(|_| rng.random_range(-5.0..=5.0)));
    x.extend((0..spec.pos_len).map(|_| rng.random_range(-50.0..=50.0)));
    x
}

/// Times `n_samples` greedy decisions after discarding warmups. In process
/// only t2 is measured; remotely t1 comes from an echo of an
/// observation-sized payload and t2 from the server's report.
pub fn profile_inference(
    net: &PolicyNetwork,
    n_samples: usize,
    transport: Transport<'_>,
    max_range: f64,
    t3: f64,
    seed: u64,
) -> Result<LatencyTrace, CliError> {
    if n_samples == 0 {
        return Err(CliError::Config("profile needs at least one sample".into()));
    }
    let mut rng = rng::stream(seed, 0, tag::PROFILE);
    let mut t1 = Vec::new();
    let mut t2 = Vec::with_capacity(n_samples);
    match transport {
        Transport::InProcess => {
            for i in 0..WARMUP + n_samples {
                let obs = random_observation(&net.input, max_range, &mut rng);
                let t0 = Instant::now();
                let a = greedy_action(net, &obs, AblationMask::NONE)?;
                let dt = t0.elapsed().as_secs_f64();
                std::hint::black_box(a);
                if i >= WARMUP {
                    t2.push(dt);
                }
            }
            Ok(LatencyTrace::new("in_process", t1, t2, t3))
        }
        Transport::Remote(client) => {
            let payload = vec![0u8; 2 + 4 * net.input.len()];
            t1.reserve(n_samples);
            for i in 0..WARMUP + n_samples {
                let obs = random_observation(&net.input, max_range, &mut rng);
                let ping = client.ping(&payload)?;
                let r = client.infer(&obs)?;
                if i >= WARMUP {
                    t1.push(ping);
                    t2.push(r.t2);
                }
            }
            Ok(LatencyTrace::new("remote", t1, t2, t3))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub num_layers: usize,
    pub num_filters: usize,
    pub mean_t2_ms: f64,
    pub p95_t2_ms: f64,
    pub parameters: usize,
}

/// Nearest-rank percentile of `values`, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Profiles a freshly initialized network for each template.
pub fn latency_sweep(
    grid: &[PolicyTemplate],
    input: InputSpec,
    output: OutputSpec,
    n_samples: usize,
    mut client: Option<&mut Client>,
    seed: u64,
) -> Result<Vec<SweepRow>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let net = PolicyNetwork::build(t, input, output, seed).map_err(|e| CliError::Config(e.to_string()))?;
        let transport = match client.as_deref_mut() {
            Some(c) => {
                c.load_checkpoint(&crate::checkpoint::Checkpoint::new(net.clone(), Default::default()).to_bytes())?;
                Transport::Remote(c)
            }
            None => Transport::InProcess,
        };
        let trace = profile_inference(&net, n_samples, transport, 20.0, 0.0, seed)?;
        let mean = trace.t2_samples.iter().sum::<f64>() / trace.t2_samples.len() as f64;
        rows.push(SweepRow {
            num_layers: t.num_layers,
            num_filters: t.num_filters,
            mean_t2_ms: mean * 1e3,
            p95_t2_ms: percentile(&trace.t2_samples, 0.95) * 1e3,
            parameters: net.parameter_count(),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&v, 1.0), 20.0);
        assert_eq!(percentile(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn in_process_profile_is_positive() {
        let net = PolicyNetwork::build(
            PolicyTemplate::new(2, 8),
            InputSpec::new(16),
            OutputSpec::Discrete { actions: 25 },
            1,
        )
        .unwrap();
        let t = profile_inference(&net, 200, Transport::InProcess, 20.0, 0.5, 3).unwrap();
        assert_eq!(t.t2_samples.len(), 200);
        assert!(t.t2_samples.iter().all(|&s| s > 0.0));
        assert!(t.t1_samples.is_empty());
    }
}
