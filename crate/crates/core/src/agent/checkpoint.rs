//! Self-describing policy checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic + format version: "ANMCKPT1"
//! u32       byte length of the TOML config echo
//! bytes     TOML: [system] (environment) and [agent] (learner) tables
//! u32       tensor count
//! per tensor:
//!   u32       name length, then UTF-8 name (e.g. "online.actor.lstm.wx")
//!   u32       rank, then u64 dimensions
//!   f64 × n   row-major data
//! ```
//!
//! Online networks carry the `online.` prefix, targets `target.`; the
//! tensor names underneath are the networks' own (actor/critic, layer,
//! matrix). A checkpoint therefore restores without any out-of-band
//! knowledge of the architecture.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::nn::TensorSet;
use crate::seeds;

use super::ddpg::RecurrentPolicy;
use super::{AgentConfig, AgentError};

/// Magic tag; bump the trailing digit on format changes.
pub const MAGIC: &[u8; 8] = b"ANMCKPT1";

/// Config echo stored inside every checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointConfig {
    /// Environment the policy was trained for.
    pub system: SystemConfig,
    /// Learner hyperparameters (also fixes the architecture).
    pub agent: AgentConfig,
}

/// A parsed checkpoint: config echo plus named tensors.
#[derive(Debug)]
pub struct Checkpoint {
    /// Deserialized config echo.
    pub config: CheckpointConfig,
    /// Named tensors in file order.
    pub tensors: Vec<(String, ArrayD<f64>)>,
}

/// The four network groups of a policy with their checkpoint prefixes.
fn groups(policy: &RecurrentPolicy) -> [(&'static str, &super::networks::Network); 4] {
    [
        ("online", &policy.actor),
        ("online", &policy.critic),
        ("target", &policy.target_actor),
        ("target", &policy.target_critic),
    ]
}

/// Writes a policy checkpoint.
pub fn save_checkpoint(
    path: &Path,
    system: &SystemConfig,
    agent: &AgentConfig,
    policy: &RecurrentPolicy,
) -> Result<(), AgentError> {
    let config = CheckpointConfig {
        system: system.clone(),
        agent: agent.clone(),
    };
    let toml = toml::to_string(&config)
        .map_err(|e| AgentError::Checkpoint(format!("config serialization: {e}")))?;

    let mut named: Vec<(String, Vec<u64>, Vec<f64>)> = Vec::new();
    for (prefix, net) in groups(policy) {
        for (name, tensor) in net.tensors() {
            named.push((
                format!("{prefix}.{name}"),
                tensor.shape().iter().map(|&d| d as u64).collect(),
                tensor.iter().copied().collect(),
            ));
        }
    }

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(toml.len() as u32).to_le_bytes())?;
    w.write_all(toml.as_bytes())?;
    w.write_all(&(named.len() as u32).to_le_bytes())?;
    for (name, dims, data) in &named {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, AgentError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64, AgentError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_string(r: &mut impl Read, len: usize) -> Result<String, AgentError> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| AgentError::Checkpoint(format!("bad UTF-8: {e}")))
}

/// Reads and validates a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, AgentError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AgentError::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }

    let toml_len = read_u32(&mut r)? as usize;
    let toml_text = read_string(&mut r, toml_len)?;
    let config: CheckpointConfig = toml::from_str(&toml_text)
        .map_err(|e| AgentError::Checkpoint(format!("config echo: {e}")))?;

    let count = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let name = read_string(&mut r, name_len)?;
        let rank = read_u32(&mut r)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u64(&mut r)? as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let tensor = ArrayD::from_shape_vec(dims, data)
            .map_err(|e| AgentError::Checkpoint(format!("tensor {name}: {e}")))?;
        tensors.push((name, tensor));
    }

    // Trailing bytes mean the file does not match its own description.
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(AgentError::Checkpoint(
            "trailing bytes after the last tensor".to_string(),
        ));
    }

    Ok(Checkpoint { config, tensors })
}

/// Rebuilds a policy from a checkpoint: constructs networks from the
/// config echo, then overwrites every tensor by name. Errors when a
/// tensor is missing, superfluous, or of the wrong shape.
pub fn restore_policy(ck: &Checkpoint) -> Result<(CheckpointConfig, RecurrentPolicy), AgentError> {
    let mut scratch_rng = seeds::stream(0, "restore-scratch");
    let mut policy = RecurrentPolicy::new(&ck.config.system, &ck.config.agent, &mut scratch_rng);

    let mut lookup: std::collections::HashMap<&str, &ArrayD<f64>> =
        ck.tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
    if lookup.len() != ck.tensors.len() {
        return Err(AgentError::Checkpoint("duplicate tensor names".to_string()));
    }

    let nets: [(&str, &mut super::networks::Network); 4] = [
        ("online", &mut policy.actor),
        ("online", &mut policy.critic),
        ("target", &mut policy.target_actor),
        ("target", &mut policy.target_critic),
    ];
    for (prefix, net) in nets {
        for (name, mut tensor) in net.tensors_mut() {
            let full = format!("{prefix}.{name}");
            let stored = lookup.remove(full.as_str()).ok_or_else(|| {
                AgentError::Checkpoint(format!("missing tensor {full}"))
            })?;
            if stored.shape() != tensor.shape() {
                return Err(AgentError::Checkpoint(format!(
                    "tensor {full}: shape {:?} in file, {:?} expected",
                    stored.shape(),
                    tensor.shape()
                )));
            }
            tensor.assign(stored);
        }
    }
    if let Some(extra) = lookup.keys().next() {
        return Err(AgentError::Checkpoint(format!(
            "unknown tensor {extra} in checkpoint"
        )));
    }

    Ok((ck.config.clone(), policy))
}

// ---------------------------------------------------------------------------
