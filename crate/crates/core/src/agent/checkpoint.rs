//! Agent checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"GDMQCKPT"           8-byte magic
//! u32                   format version (1)
//! u64                   header length in bytes
//! header                UTF-8 JSON: network spec, agent config, seed,
//!                       epsilon bits, counters, array lengths
//! f64 × online_len      online weights, in parameter order
//! f64 × target_len      target weights
//! f64 × moments_len × 2 Adam first and second moments (absent for SGD)
//! ```
//!
//! The replay memory is not stored; a resumed agent refills it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AgentConfig, D3qlAgent};
use crate::nn::{NetworkSpec, NnError, Optimizer, OptimizerKind, QNetwork};

const MAGIC: &[u8; 8] = b"GDMQCKPT";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("bad header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("network: {0}")]
    Network(#[from] NnError),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    config: AgentConfig,
    seed: u64,
    epsilon_bits: u64,
    steps: u64,
    updates: u64,
    optimizer: OptimizerKind,
    adam_steps: u64,
    online_len: usize,
    target_len: usize,
    moments_len: usize,
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save_checkpoint<W: Write>(agent: &D3qlAgent, mut out: W) -> Result<(), CheckpointError> {
    let online = agent.online.flat_params();
    let target = agent.target.flat_params();
    let (adam_steps, moments) = match &agent.optimizer {
        Optimizer::Sgd => (0, None),
        Optimizer::Adam { first, second, steps } => (*steps, Some((first, second))),
    };
    let header = Header {
        spec: agent.online.spec().clone(),
        config: agent.config.clone(),
        seed: agent.seed,
        epsilon_bits: agent.epsilon.to_bits(),
        steps: agent.steps,
        updates: agent.updates,
        optimizer: agent.optimizer.kind(),
        adam_steps,
        online_len: online.len(),
        target_len: target.len(),
        moments_len: moments.map_or(0, |(m, _)| m.len()),
    };
    let header = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    write_f64s(&mut out, &online)?;
    write_f64s(&mut out, &target)?;
    if let Some((first, second)) = moments {
        write_f64s(&mut out, first)?;
        write_f64s(&mut out, second)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut input: R) -> Result<D3qlAgent, CheckpointError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let expected = header.spec.parameter_count();
    if header.online_len != expected || header.target_len != expected {
        return Err(CheckpointError::Inconsistent(format!(
            "weights for {} / {} parameters, architecture has {expected}",
            header.online_len, header.target_len
        )));
    }
    let mut online = QNetwork::new(header.spec.clone())?;
    online.set_flat_params(&read_f64s(&mut input, header.online_len)?)?;
    let mut target = online.zeros_like();
    target.set_flat_params(&read_f64s(&mut input, header.target_len)?)?;
    let optimizer = match header.optimizer {
        OptimizerKind::Sgd => Optimizer::Sgd,
        OptimizerKind::Adam => {
            if header.moments_len != expected {
                return Err(CheckpointError::Inconsistent("Adam moments do not match the architecture".into()));
            }
            Optimizer::Adam {
                first: read_f64s(&mut input, header.moments_len)?,
                second: read_f64s(&mut input, header.moments_len)?,
                steps: header.adam_steps,
            }
        }
    };
    Ok(D3qlAgent::from_parts(
        header.config,
        online,
        target,
        Some(optimizer),
        header.steps,
        header.updates,
        Some(f64::from_bits(header.epsilon_bits)),
        header.seed,
    ))
}
