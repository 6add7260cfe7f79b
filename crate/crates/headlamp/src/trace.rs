//! Attention traces on disk: one tensor file per (document, region, layer,
//! head) plus a JSON manifest describing every file.

use std::fs;
use std::path::Path;

use headlamp_core::gating::{HeadAddress, Region};
use headlamp_core::model::AttentionRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_file;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub doc: usize,
    pub region: Region,
    pub layer: usize,
    pub head: usize,
    /// File name relative to the trace directory.
    pub file: String,
    /// `[query steps, keys]`.
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub v: u32,
    pub docs: usize,
    pub entries: Vec<TraceEntry>,
}

pub fn file_name(doc: usize, addr: HeadAddress) -> String {
    format!("doc{doc:05}_{}_l{}_h{}.atnd", addr.region.as_str(), addr.layer, addr.head)
}

/// Writes `traces[d]` (all records of document `d`) under `dir`.
pub fn write_trace(dir: &Path, traces: &[Vec<AttentionRecord>]) -> Result<TraceManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (doc, records) in traces.iter().enumerate() {
        for r in records {
            let file = file_name(doc, r.address);
            tensor_file::write(&dir.join(&file), &r.rows)?;
            entries.push(TraceEntry {
                doc,
                region: r.address.region,
                layer: r.address.layer,
                head: r.address.head,
                file,
                shape: r.rows.shape().to_vec(),
            });
        }
    }
    let manifest = TraceManifest { v: MANIFEST_VERSION, docs: traces.len(), entries };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<TraceManifest> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: TraceManifest = serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.v != MANIFEST_VERSION {
        return Err(Error::format(&path, format!("manifest version {} not supported (expected {MANIFEST_VERSION})", manifest.v)));
    }
    Ok(manifest)
}

/// Reads a trace back, grouped by document in manifest order.
pub fn read_trace(dir: &Path) -> Result<Vec<Vec<AttentionRecord>>> {
    let manifest = read_manifest(dir)?;
    let mut traces = vec![Vec::new(); manifest.docs];
    for e in &manifest.entries {
        let path = dir.join(&e.file);
        let rows = tensor_file::read(&path)?;
        if rows.shape() != e.shape.as_slice() {
            return Err(Error::format(&path, format!("shape {:?} but manifest says {:?}", rows.shape(), e.shape)));
        }
        let slot = traces.get_mut(e.doc).ok_or_else(|| Error::format(&path, format!("document {} out of range", e.doc)))?;
        slot.push(AttentionRecord::new(HeadAddress::new(e.region, e.layer, e.head), rows)?);
    }
    Ok(traces)
}
