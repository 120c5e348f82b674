//! Checkpoint files.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AGCK"
//! 4       4     u32 format version (1)
//! 8       4     u32 header length H
//! 12      H     UTF-8 JSON header: template, input/output spec, metadata,
//!               and the name and length of every array that follows
//! 12+H    8*N   f64 arrays in header order; "params" is always first
//! end-32  32    SHA-256 of every preceding byte
//! ```
//!
//! Parameters are stored as 64-bit floats, so a save/load round trip is
//! bit-exact.

use std::fs;
use std::path::Path;

use airgap_core::agents::Progress;
use airgap_core::nn::{InputSpec, OutputSpec, PolicyNetwork, PolicyTemplate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MAGIC: &[u8; 4] = b"AGCK";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    /// "dqn" or "ppo".
    pub algo: String,
    pub step: u64,
    pub zone: u8,
    pub env_hash: String,
    pub seed: u64,
    /// Trainer counters for resuming.
    #[serde(default)]
    pub progress: Option<Progress>,
    #[serde(default)]
    pub adam_t: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayDesc {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    template: PolicyTemplate,
    input: InputSpec,
    output: OutputSpec,
    meta: CheckpointMeta,
    arrays: Vec<ArrayDesc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: PolicyNetwork,
    pub meta: CheckpointMeta,
    /// Additional named arrays (target network, optimizer moments).
    pub extra: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(net: PolicyNetwork, meta: CheckpointMeta) -> Self {
        Checkpoint {
            net,
            meta,
            extra: Vec::new(),
        }
    }

    pub fn with_array(mut self, name: &str, data: Vec<f64>) -> Self {
        self.extra.push((name.to_string(), data));
        self
    }

    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut arrays = vec![ArrayDesc {
            name: "params".into(),
            len: self.net.params.len(),
        }];
        arrays.extend(self.extra.iter().map(|(n, v)| ArrayDesc {
            name: n.clone(),
            len: v.len(),
        }));
        let header = Header {
            template: self.net.template,
            input: self.net.input,
            output: self.net.output,
            meta: self.meta.clone(),
            arrays,
        };
        let h = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + h.len() + 8 * self.net.params.len() + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(h.len() as u32).to_le_bytes());
        out.extend_from_slice(&h);
        for v in self.net.params.iter().chain(self.extra.iter().flat_map(|(_, v)| v)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Checkpoint(m.to_string());
        if bytes.len() < 12 + DIGEST_LEN {
            return Err(bad("file too short"));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(CliError::Checkpoint(format!("unsupported version {version}")));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch (corrupted payload)"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let h = body.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(h).map_err(|e| CliError::Checkpoint(format!("header: {e}")))?;
        let mut data = &body[12 + hlen..];
        let total: usize = header.arrays.iter().map(|a| a.len).sum();
        if data.len() != 8 * total {
            return Err(bad("array lengths disagree with payload size"));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for a in &header.arrays {
            let (chunk, rest) = data.split_at(8 * a.len);
            data = rest;
            let v: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            arrays.push((a.name.clone(), v));
        }
        if arrays.first().map(|(n, _)| n.as_str()) != Some("params") {
            return Err(bad("first array must be params"));
        }
        let (_, params) = arrays.remove(0);
        let mut net = PolicyNetwork::layout(header.template, header.input, header.output)
            .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        if net.params.len() != params.len() {
            return Err(CliError::Checkpoint(format!(
                "template {} expects {} parameters, file holds {}",
                header.template,
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(Checkpoint {
            net,
            meta: header.meta,
            extra: arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        // write-then-rename so a crash never leaves a torn checkpoint
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks the network input matches `expected`.
    pub fn load_for(path: &Path, expected: InputSpec) -> Result<Self, CliError> {
        let c = Self::load(path)?;
        if c.net.input != expected {
            return Err(CliError::Checkpoint(format!(
                "sizing error: checkpoint expects {} rays, environment provides {}",
                c.net.input.n_rays, expected.n_rays
            )));
        }
        Ok(c)
    }

    /// Short content identifier.
    pub fn id(&self) -> String {
        let bytes: Vec<u8> = self.net.params.iter().flat_map(|v| v.to_le_bytes()).collect();
        crate::config::sha256_hex(&bytes)[..16].to_string()
    }
}
