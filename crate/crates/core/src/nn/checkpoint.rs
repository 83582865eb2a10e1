//! Checkpoint files: an 8-byte little-endian header length, a JSON header,
//! then each tensor as little-endian binary32 values in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    meta: Value,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCheckpoint {
    pub meta: Value,
    pub tensors: Vec<(TensorInfo, Vec<f32>)>,
    /// Size of the header block including the length prefix.
    pub header_bytes: usize,
}

impl RawCheckpoint {
    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|(_, v)| v.len()).sum()
    }
}

pub fn encode_checkpoint<T: Real>(meta: &Value, tensors: &[(String, &Tensor<T>)]) -> Result<Vec<u8>> {
    let header = Header {
        meta: meta.clone(),
        tensors: tensors.iter().map(|(n, t)| TensorInfo { name: n.clone(), shape: t.shape().to_vec() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + 4 * tensors.iter().map(|(_, t)| t.len()).sum::<usize>());
    out.extend((json.len() as u64).to_le_bytes());
    out.extend(json);
    for (name, t) in tensors {
        if !t.all_finite() {
            return Err(Error::NonFinite(format!("tensor {name} has non-finite values")));
        }
        for v in &t.data {
            out.extend((v.f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_checkpoint<T: Real>(path: &Path, meta: &Value, tensors: &[(String, &Tensor<T>)]) -> Result<usize> {
    let bytes = encode_checkpoint(meta, tensors)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, &bytes)?;
    Ok(bytes.len())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<RawCheckpoint> {
    let corrupt = |m: &str| Error::Checkpoint(m.to_string());
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| corrupt("file too short"))?.try_into().unwrap();
    let hlen = u64::from_le_bytes(len_bytes) as usize;
    let json = bytes.get(8..8usize.checked_add(hlen).ok_or_else(|| corrupt("bad header length"))?);
    let header: Header = serde_json::from_slice(json.ok_or_else(|| corrupt("truncated header"))?)
        .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    let mut at = 8 + hlen;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for info in header.tensors {
        let n: usize = info.shape.iter().product();
        let blob = bytes.get(at..at + 4 * n).ok_or_else(|| corrupt("truncated tensor data"))?;
        let values: Vec<f32> = blob.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(corrupt(&format!("tensor {} has non-finite values", info.name)));
        }
        at += 4 * n;
        tensors.push((info, values));
    }
    if at != bytes.len() {
        return Err(corrupt("trailing bytes after the last tensor"));
    }
    Ok(RawCheckpoint { meta: header.meta, tensors, header_bytes: 8 + hlen })
}

pub fn read_checkpoint(path: &Path) -> Result<RawCheckpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
