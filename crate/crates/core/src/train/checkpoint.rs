use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use super::policy::PolicyParams;
use crate::error::{Error, Result};
use crate::hash::{hex64, parse_hex64};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointFormat {
    /// Little-endian header and weights.
    #[default]
    Binary,
    /// JSON with the non-zero weights only.
    Json,
}

#[derive(Serialize, Deserialize)]
struct JsonCheckpoint {
    format_version: u32,
    feature_digest: String,
    features: FeatureConfig,
    episode: u64,
    /// (index, weight) for non-zero weights.
    weights: Vec<(u32, f64)>,
}

/// Binary layout: magic, u32 version, u64 feature digest, u64 dim,
/// u64 max_goal_tokens, u64 episode, then `dim` f64 weights.
pub fn encode_checkpoint(params: &PolicyParams, episode: u64, format: CheckpointFormat) -> Vec<u8> {
    match format {
        CheckpointFormat::Binary => {
            let mut b = Vec::with_capacity(40 + 8 * params.weights.len());
            b.extend_from_slice(CHECKPOINT_MAGIC);
            b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
            b.extend_from_slice(&params.features.digest().to_le_bytes());
            b.extend_from_slice(&(params.features.dim as u64).to_le_bytes());
            b.extend_from_slice(&(params.features.max_goal_tokens as u64).to_le_bytes());
            b.extend_from_slice(&episode.to_le_bytes());
            for w in &params.weights {
                b.extend_from_slice(&w.to_le_bytes());
            }
            b
        }
        CheckpointFormat::Json => {
            let ck = JsonCheckpoint {
                format_version: CHECKPOINT_VERSION,
                feature_digest: hex64(params.features.digest()),
                features: params.features,
                episode,
                weights: params
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(i, w)| (i as u32, *w))
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&ck).expect("checkpoint serializes");
            s.push('\n');
            s.into_bytes()
        }
    }
}

fn bad(message: impl Into<String>) -> Error {
    Error::Schema {
        context: "checkpoint".into(),
        message: message.into(),
    }
}

fn check_features(features: FeatureConfig, digest: u64) -> Result<()> {
    features.check()?;
    if features.digest() != digest {
        return Err(bad(format!(
            "feature digest {} does not match this build ({})",
            hex64(digest),
            hex64(features.digest())
        )));
    }
    Ok(())
}

/// Decodes either format, detected by the magic bytes.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(PolicyParams, u64)> {
    if bytes.starts_with(CHECKPOINT_MAGIC) {
        let u64_at = |o: usize| -> Result<u64> {
            bytes
                .get(o..o + 8)
                .map(|s| u64::from_le_bytes(s.try_into().unwrap()))
                .ok_or_else(|| bad("truncated header"))
        };
        let version = bytes
            .get(4..8)
            .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
            .ok_or_else(|| bad("truncated header"))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let digest = u64_at(8)?;
        let features = FeatureConfig {
            dim: u64_at(16)? as usize,
            max_goal_tokens: u64_at(24)? as usize,
        };
        let episode = u64_at(32)?;
        check_features(features, digest)?;
        let body = &bytes[40..];
        if body.len() != 8 * features.dim {
            return Err(bad(format!(
                "expected {} weights, found {} bytes",
                features.dim,
                body.len()
            )));
        }
        let weights: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = PolicyParams { features, weights };
        if !params.is_finite() {
            return Err(bad("non-finite weight"));
        }
        return Ok((params, episode));
    }
    let ck: JsonCheckpoint = serde_json::from_slice(bytes).map_err(|e| bad(e.to_string()))?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {}", ck.format_version)));
    }
    let digest = parse_hex64(&ck.feature_digest).ok_or_else(|| bad("bad feature digest"))?;
    check_features(ck.features, digest)?;
    let mut params = PolicyParams::zeros(ck.features);
    for (i, w) in ck.weights {
        let slot = params
            .weights
            .get_mut(i as usize)
            .ok_or_else(|| bad(format!("weight index {i} out of range")))?;
        *slot = w;
    }
    if !params.is_finite() {
        return Err(bad("non-finite weight"));
    }
    Ok((params, ck.episode))
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, episode: u64, format: CheckpointFormat) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params, episode, format)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, u64)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
