//! Model file: 8 magic bytes, format version (u32 LE), JSON header length
//! (u32 LE), JSON header (configuration, context dimension, country
//! vocabulary, parameter count), then the parameters as little-endian f64.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RankerConfig, RankerError, RankerModel};

const MAGIC: &[u8; 8] = b"TOPORNK\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: RankerConfig,
    context_dim: usize,
    countries: Vec<String>,
    parameter_count: usize,
}

pub fn save_model(model: &RankerModel, path: &Path) -> Result<(), RankerError> {
    let header = Header {
        config: model.config.clone(),
        context_dim: model.context_dim,
        countries: model.countries.clone(),
        parameter_count: model.params.len(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| RankerError::Corrupt(e.to_string()))?;
    let mut bytes = Vec::with_capacity(16 + header.len() + model.params.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header);
    for p in &model.params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<RankerModel, RankerError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(RankerError::Corrupt("missing model header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(RankerError::Incompatible {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_bytes = bytes
        .get(16..16 + header_len)
        .ok_or_else(|| RankerError::Corrupt("truncated header".into()))?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| RankerError::Corrupt(e.to_string()))?;
    let payload = &bytes[16 + header_len..];
    if payload.len() != header.parameter_count * 8 {
        return Err(RankerError::Corrupt(format!(
            "expected {} parameter bytes, found {}",
            header.parameter_count * 8,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    header
        .config
        .validate()
        .map_err(|e| RankerError::Corrupt(e.to_string()))?;
    RankerModel::from_parts(header.config, header.context_dim, header.countries, params)
        .map_err(|e| RankerError::Corrupt(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::tests::{context, features, small_model};

    #[test]
    fn round_trip_scores_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = small_model(12);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let f = [features(true, 2.0, "US"), features(false, 4.0, "XX")];
        let ctx = context(16, 3);
        assert_eq!(model.score_candidates(&f, &ctx).unwrap(), loaded.score_candidates(&f, &ctx).unwrap());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&small_model(1), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        for cut in [0, 10, 30, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_model(&path), Err(RankerError::Corrupt(_))), "cut {cut}");
        }
    }

    #[test]
    fn version_mismatch_is_incompatible() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&small_model(1), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(RankerError::Incompatible { found: 9, expected: 1 })));
    }
}
