//! Self-describing binary tensor container.
//!
//! Single-file format shared by model checkpoints and the on-disk feature
//! cache: a magic tag, a JSON header (kind, free-form metadata, tensor
//! manifest), then one little-endian f64 blob. Writing f64 bits verbatim keeps
//! save/load round trips bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SDETNSR1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in f64 elements.
    offset: usize,
    len: usize,
}

pub struct ContainerWriter {
    header: Header,
    blob: Vec<u8>,
}

impl ContainerWriter {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        ContainerWriter {
            header: Header {
                kind: kind.to_string(),
                meta,
                tensors: Vec::new(),
            },
            blob: Vec::new(),
        }
    }

    pub fn add_tensor(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor {name}: shape/data length mismatch"
        );
        let offset = self.blob.len() / 8;
        for v in data {
            self.blob.extend_from_slice(&v.to_le_bytes());
        }
        self.header.tensors.push(TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
            len: data.len(),
        });
    }

    pub fn write(self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let header = serde_json::to_vec(&self.header)?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
        f.write_all(&(header.len() as u64).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        f.write_all(&header).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.blob).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub struct Container {
    header: Header,
    blob: Vec<u8>,
}

impl Container {
    pub fn read(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != MAGIC {
            return Err(Error::InvalidInput(format!(
                "{}: not a tensor container",
                path.display()
            )));
        }
        let mut len_bytes = [0u8; 8];
        f.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        f.read_exact(&mut header_bytes)
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_slice(&header_bytes)?;
        let mut blob = Vec::new();
        f.read_to_end(&mut blob).map_err(|e| Error::io(path, e))?;
        Ok(Container { header, blob })
    }

    pub fn kind(&self) -> &str {
        &self.header.kind
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.header.meta
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.header.tensors.iter().map(|t| t.name.as_str())
    }

    pub fn tensor(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let entry = self
            .header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("tensor {name} not in container")))?;
        let start = entry.offset * 8;
        let end = start + entry.len * 8;
        if end > self.blob.len() {
            return Err(Error::InvalidInput(format!(
                "tensor {name}: blob truncated"
            )));
        }
        let data = self.blob[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((entry.shape.clone(), data))
    }
}
