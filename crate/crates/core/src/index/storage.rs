//! Single-file index container.
//!
//! Layout: 8 magic bytes, format version (u32 LE), payload length (u64 LE),
//! then a bincode payload holding the entries and the name/n-gram tables in
//! build order. Hash maps are rebuilt on load.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GazetteerIndex, IndexConfig, IndexError};
use crate::gazetteer::GazetteerEntry;

const MAGIC: &[u8; 8] = b"TOPOIDX\0";
pub const INDEX_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: IndexConfig,
    entries: Vec<GazetteerEntry>,
    names: Vec<String>,
    name_entries: Vec<Vec<u32>>,
    postings: Vec<(String, Vec<u32>)>,
}

pub fn save_index(index: &GazetteerIndex, path: &Path) -> Result<(), IndexError> {
    let mut postings: Vec<(String, Vec<u32>)> = index
        .postings
        .iter()
        .map(|(g, ids)| (g.clone(), ids.clone()))
        .collect();
    postings.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let snapshot = Snapshot {
        config: index.config.clone(),
        entries: index.entries.clone(),
        names: index.names.clone(),
        name_entries: index.name_entries.clone(),
        postings,
    };
    let payload = bincode::serialize(&snapshot).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&payload);
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<GazetteerIndex, IndexError> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(IndexError::Corrupt("missing index header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != INDEX_FORMAT_VERSION {
        return Err(IndexError::Incompatible {
            found: version,
            expected: INDEX_FORMAT_VERSION,
        });
    }
    let declared = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if declared != payload.len() as u64 {
        return Err(IndexError::Corrupt(format!(
            "payload is {} bytes, header declares {declared}",
            payload.len()
        )));
    }
    let snap: Snapshot = bincode::deserialize(payload).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    from_snapshot(snap)
}

fn from_snapshot(snap: Snapshot) -> Result<GazetteerIndex, IndexError> {
    snap.config.validate()?;
    let n_entries = snap.entries.len();
    let n_names = snap.names.len();
    if snap.name_entries.len() != n_names {
        return Err(IndexError::Corrupt("name table length mismatch".into()));
    }
    if snap
        .name_entries
        .iter()
        .flatten()
        .any(|&p| p as usize >= n_entries)
        || snap
            .postings
            .iter()
            .flat_map(|(_, ids)| ids)
            .any(|&n| n as usize >= n_names)
    {
        return Err(IndexError::Corrupt("dangling reference".into()));
    }
    let mut positions = HashMap::with_capacity(n_entries);
    for (pos, e) in snap.entries.iter().enumerate() {
        if positions.insert(e.geoname_id, pos as u32).is_some() {
            return Err(IndexError::Corrupt(format!("duplicate geoname id {}", e.geoname_id)));
        }
    }
    let name_lookup = snap
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();
    Ok(GazetteerIndex {
        config: snap.config,
        entries: snap.entries,
        positions,
        names: snap.names,
        name_lookup,
        name_entries: snap.name_entries,
        postings: snap.postings.into_iter().collect(),
    })
}
