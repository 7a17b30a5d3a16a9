//! Flat binary container for named tensors.
//!
//! Layout:
//!
//! ```text
//! magic        8 bytes   b"HANFORGE"
//! header_len   u64 LE
//! header       header_len bytes of UTF-8 JSON
//! payload      f64 LE values, tensors concatenated in header order
//! ```
//!
//! The header records the format version, a free-form `topology` value and,
//! for every tensor, its name and shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::tensor::Tensor;

pub const CONTAINER_MAGIC: &[u8; 8] = b"HANFORGE";
pub const CONTAINER_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorContainer {
    pub topology: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    topology: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

impl TensorContainer {
    pub fn new(topology: serde_json::Value) -> Self {
        TensorContainer {
            topology,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Removes and returns the named tensor.
    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        let idx = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| HanError::Format(format!("missing tensor {name:?}")))?;
        Ok(self.tensors.remove(idx).1)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: CONTAINER_FORMAT_VERSION,
            topology: self.topology.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| HanError::Format(e.to_string()))?;
        let n_values: usize = self.tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * n_values);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a container, validating every length before allocating.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CONTAINER_MAGIC {
            return Err(HanError::Format("not a tensor container (bad magic)".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let rest = &bytes[16..];
        let header_len = usize::try_from(header_len)
            .ok()
            .filter(|&n| n <= rest.len())
            .ok_or_else(|| HanError::Format(format!("header length {header_len} exceeds file")))?;
        let header: Header = serde_json::from_slice(&rest[..header_len])
            .map_err(|e| HanError::Format(format!("bad container header: {e}")))?;
        if header.format_version != CONTAINER_FORMAT_VERSION {
            return Err(HanError::Format(format!(
                "unsupported container version {}",
                header.format_version
            )));
        }
        let mut payload = &rest[header_len..];
        let mut tensors = Vec::with_capacity(header.tensors.len().min(1024));
        for entry in header.tensors {
            if tensors.iter().any(|(n, _): &(String, Tensor)| *n == entry.name) {
                return Err(HanError::Format(format!("duplicate tensor {:?}", entry.name)));
            }
            if entry.shape.is_empty() || entry.shape.len() > 2 {
                return Err(HanError::Format(format!(
                    "tensor {:?} has unsupported rank {}",
                    entry.name,
                    entry.shape.len()
                )));
            }
            let count = entry
                .shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(8).map(|b| (n, b)));
            let (count, n_bytes) = match count {
                Some((n, b)) if b <= payload.len() => (n, b),
                _ => {
                    return Err(HanError::Format(format!(
                        "tensor {:?} with shape {:?} exceeds payload",
                        entry.name, entry.shape
                    )))
                }
            };
            let data: Vec<f64> = payload[..n_bytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            debug_assert_eq!(data.len(), count);
            payload = &payload[n_bytes..];
            tensors.push((entry.name, Tensor::new(entry.shape, data)?));
        }
        if !payload.is_empty() {
            return Err(HanError::Format(format!(
                "{} trailing bytes after last tensor",
                payload.len()
            )));
        }
        Ok(TensorContainer {
            topology: header.topology,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| HanError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| HanError::io(path, e))?;
        TensorContainer::from_bytes(&bytes)
    }
}
