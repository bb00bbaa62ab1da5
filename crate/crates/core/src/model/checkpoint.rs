//! Single-file checkpoints: an 8-byte little-endian manifest length, a JSON
//! manifest, then every tensor as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{ModelConfig, NeuroMamba};
use super::params::Params;
use crate::error::{Error, Result};
use crate::real::Real;

pub const FORMAT_NAME: &str = "neuromamba-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
    pub blob_len: usize,
}

pub fn checkpoint_bytes<F: Real>(model: &NeuroMamba<F>) -> Vec<u8> {
    let tensors = model
        .layout()
        .into_iter()
        .map(|p| TensorEntry {
            offset: p.offset * 4,
            name: p.name,
            shape: p.shape,
        })
        .collect();
    let blob: Vec<u8> = model
        .to_flat()
        .into_iter()
        .flat_map(|v| (v.f64() as f32).to_le_bytes())
        .collect();
    let manifest = CheckpointManifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        config: model.config,
        tensors,
        blob_len: blob.len(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(8 + json.len() + blob.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    out
}

pub fn save_checkpoint<F: Real>(model: &NeuroMamba<F>, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

/// Split a checkpoint into its manifest and tensor blob.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<(CheckpointManifest, &[u8])> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| Error::Checkpoint("file is too short for a header".into()))?;
    let json_len = u64::from_le_bytes(len_bytes) as usize;
    let json = bytes
        .get(8..8usize.saturating_add(json_len))
        .ok_or_else(|| Error::Checkpoint("truncated manifest".into()))?;
    let manifest: CheckpointManifest = serde_json::from_slice(json)
        .map_err(|e| Error::Checkpoint(format!("unreadable manifest: {e}")))?;
    if manifest.format != FORMAT_NAME {
        return Err(Error::Checkpoint(format!("unknown format '{}'", manifest.format)));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} is not supported (expected {FORMAT_VERSION})",
            manifest.version
        )));
    }
    let blob = &bytes[8 + json_len..];
    if blob.len() < manifest.blob_len {
        return Err(Error::Checkpoint(format!(
            "truncated blob: {} of {} bytes",
            blob.len(),
            manifest.blob_len
        )));
    }
    if blob.len() > manifest.blob_len {
        return Err(Error::Checkpoint(format!(
            "blob has {} bytes but the manifest declares {}",
            blob.len(),
            manifest.blob_len
        )));
    }
    let declared: usize = manifest
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>() * 4)
        .sum();
    if declared != manifest.blob_len {
        return Err(Error::Checkpoint(format!(
            "tensors need {declared} bytes but the blob has {}",
            manifest.blob_len
        )));
    }
    Ok((manifest, blob))
}

/// Load parameters into a model built from `config`; every tensor must match
/// by name and shape.
pub fn load_into_config<F: Real>(bytes: &[u8], config: ModelConfig) -> Result<NeuroMamba<F>> {
    let (manifest, blob) = parse_checkpoint(bytes)?;
    let mut model = NeuroMamba::<F>::new(config, 0)?;
    let layout = model.layout();
    for (i, expected) in layout.iter().enumerate() {
        let found = manifest.tensors.iter().find(|t| t.name == expected.name);
        match found {
            None => {
                return Err(Error::ParamShape {
                    param: expected.name.clone(),
                    expected: expected.shape.clone(),
                    found: vec![],
                })
            }
            Some(t) if t.shape != expected.shape => {
                return Err(Error::ParamShape {
                    param: expected.name.clone(),
                    expected: expected.shape.clone(),
                    found: t.shape.clone(),
                })
            }
            Some(t) if manifest.tensors.get(i).map(|m| &m.name) != Some(&expected.name) => {
                return Err(Error::Checkpoint(format!("tensor '{}' is out of order", t.name)))
            }
            Some(_) => {}
        }
    }
    if manifest.tensors.len() != layout.len() {
        let extra = &manifest.tensors[layout.len().min(manifest.tensors.len())..];
        let name = extra.first().map(|t| t.name.clone()).unwrap_or_default();
        return Err(Error::ParamShape {
            param: name,
            expected: vec![],
            found: extra.first().map(|t| t.shape.clone()).unwrap_or_default(),
        });
    }
    let mut flat = Vec::with_capacity(blob.len() / 4);
    for entry in &manifest.tensors {
        let n: usize = entry.shape.iter().product();
        let bytes = blob
            .get(entry.offset..entry.offset + 4 * n)
            .ok_or_else(|| Error::Checkpoint(format!("tensor '{}' lies outside the blob", entry.name)))?;
        flat.extend(
            bytes
                .chunks_exact(4)
                .map(|c| F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64)),
        );
    }
    model.assign_flat(&flat);
    Ok(model)
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<NeuroMamba<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (manifest, _) = parse_checkpoint(&bytes)?;
    load_into_config(&bytes, manifest.config)
}
