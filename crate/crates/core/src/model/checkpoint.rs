//! Checkpoint format: a versioned JSON header (schema version, model
//! config, training epoch, best validation loss) followed by named
//! tensor blobs with explicit shapes and little-endian f32 payloads.
//! Round-trips are bit-exact.

use super::{build_network, ModelConfig, ModelError, Network, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"DSTCKPT1";

/// Checkpoint schema version.
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema_version: u32,
    pub config: ModelConfig,
    pub epoch: u32,
    pub best_val_loss: f64,
}

impl CheckpointMeta {
    pub fn new(config: ModelConfig, epoch: u32, best_val_loss: f64) -> Self {
        CheckpointMeta {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config,
            epoch,
            best_val_loss,
        }
    }
}

/// Serializes network state (parameters and batch-norm statistics).
pub fn save_network_bytes(network: &mut Network<f32>, meta: &CheckpointMeta) -> Vec<u8> {
    let mut tensors: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    network.visit_state_mut(&mut |name, value| {
        tensors.push((
            name.to_string(),
            value.shape().to_vec(),
            value.iter().copied().collect(),
        ));
    });

    let header = serde_json::to_vec(meta).expect("meta serialization");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.push(shape.len() as u8);
        for dim in shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_network(network: &mut Network<f32>, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let bytes = save_network_bytes(network, meta);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

fn read_exact<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    if *pos + n > bytes.len() {
        return Err(ModelError::Checkpoint(format!(
            "truncated checkpoint at byte {pos}"
        )));
    }
    let slice = &bytes[*pos..*pos + n];
    *pos += n;
    Ok(slice)
}

/// Rebuilds a network from checkpoint bytes.
pub fn load_network_bytes(bytes: &[u8]) -> Result<(Network<f32>, CheckpointMeta)> {
    let mut pos = 0usize;
    if read_exact(bytes, &mut pos, 8)? != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let header_len = u32::from_le_bytes(read_exact(bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
    let meta: CheckpointMeta = serde_json::from_slice(read_exact(bytes, &mut pos, header_len)?)
        .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
    if meta.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported schema version {}",
            meta.schema_version
        )));
    }
    let count = u32::from_le_bytes(read_exact(bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
    let mut blobs: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::with_capacity(count);
    for _ in 0..count {
        let name_len =
            u16::from_le_bytes(read_exact(bytes, &mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(read_exact(bytes, &mut pos, name_len)?.to_vec())
            .map_err(|e| ModelError::Checkpoint(format!("bad tensor name: {e}")))?;
        let ndim = read_exact(bytes, &mut pos, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape
                .push(u32::from_le_bytes(read_exact(bytes, &mut pos, 4)?.try_into().unwrap())
                    as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = read_exact(bytes, &mut pos, numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.insert(name, (shape, data));
    }

    let mut network = build_network::<f32>(&meta.config)?;
    let mut missing = Vec::new();
    network.visit_state_mut(&mut |name, mut value| {
        match blobs.remove(name) {
            Some((shape, data)) if shape == value.shape() => {
                for (dst, src) in value.iter_mut().zip(data) {
                    *dst = src;
                }
            }
            Some((shape, _)) => missing.push(format!(
                "{name}: shape {shape:?} does not match {:?}",
                value.shape()
            )),
            None => missing.push(format!("{name}: absent from checkpoint")),
        }
    });
    if !missing.is_empty() {
        return Err(ModelError::Checkpoint(missing.join("; ")));
    }
    if !blobs.is_empty() {
        let extra: Vec<&String> = blobs.keys().collect();
        return Err(ModelError::Checkpoint(format!(
            "checkpoint has unknown tensors: {extra:?}"
        )));
    }
    Ok((network, meta))
}

pub fn load_network(path: &Path) -> Result<(Network<f32>, CheckpointMeta)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    load_network_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let cfg = ModelConfig {
            input_height: 32,
            input_width: 32,
            width_multiplier: 1.0 / 16.0,
            middle_module_count: 1,
            num_classes: 2,
            seed: 11,
        };
        let mut net = build_network::<f32>(&cfg).unwrap();
        let meta = CheckpointMeta::new(cfg, 7, 0.125);
        let bytes = save_network_bytes(&mut net, &meta);
        let (mut restored, restored_meta) = load_network_bytes(&bytes).unwrap();
        assert_eq!(restored_meta, meta);
        let bytes2 = save_network_bytes(&mut restored, &meta);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        assert!(load_network_bytes(b"not a checkpoint").is_err());
        let cfg = ModelConfig {
            input_height: 32,
            input_width: 32,
            width_multiplier: 1.0 / 16.0,
            middle_module_count: 0,
            num_classes: 2,
            seed: 0,
        };
        let mut net = build_network::<f32>(&cfg).unwrap();
        let mut bytes = save_network_bytes(&mut net, &CheckpointMeta::new(cfg, 0, 1e9));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            load_network_bytes(&bytes),
            Err(ModelError::Checkpoint(_))
        ));
    }
}
