//! Binary checkpoints for [`MlpDenoiser`].
//!
//! Layout: the magic bytes `DCK1`, a little-endian `u64` header length, a
//! UTF-8 JSON header, then each tensor's raw little-endian payload in header
//! order. Tensors are written as `f64`; `f32` tensors are accepted on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::denoiser::{MlpConfig, MlpDenoiser};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DCK1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub model: MlpConfig,
    pub run_config: RunConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(net: &MlpDenoiser, config: &RunConfig) -> Vec<u8> {
    let specs = net.tensor_specs();
    let header = Header {
        version: VERSION,
        model: net.config().clone(),
        run_config: config.clone(),
        tensors: specs
            .iter()
            .map(|s| TensorEntry {
                name: s.name.clone(),
                shape: s.shape.clone(),
                dtype: Dtype::F64,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &specs {
        for v in &net.params()[s.offset..s.offset + s.len()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    bytes
        .get(offset..offset.checked_add(len).ok_or(Error::TruncatedPayload { offset })?)
        .ok_or(Error::TruncatedPayload { offset })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(MlpDenoiser, RunConfig)> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let len_bytes = take(bytes, 4, 8)?;
    let header_len = u64::from_le_bytes(len_bytes.try_into().expect("eight bytes"));
    let header_len = usize::try_from(header_len).map_err(|_| Error::TruncatedPayload { offset: 12 })?;
    let header_bytes = take(bytes, 12, header_len)?;
    let version: serde_json::Value =
        serde_json::from_slice(header_bytes).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let found = version.get("version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(VERSION)) {
        return Err(Error::VersionMismatch {
            found: found.and_then(|v| u32::try_from(v).ok()).unwrap_or(0),
            expected: VERSION,
        });
    }
    let header: Header = serde_json::from_value(version).map_err(|e| Error::MalformedHeader(e.to_string()))?;

    let template = MlpDenoiser::zeroed(header.model.clone())?;
    let specs = template.tensor_specs();
    if specs.len() != header.tensors.len() {
        return Err(Error::MalformedHeader(format!(
            "expected {} tensors, header lists {}",
            specs.len(),
            header.tensors.len()
        )));
    }
    let mut params = vec![0.0; template.num_params()];
    let mut offset = 12 + header_len;
    for (spec, entry) in specs.iter().zip(&header.tensors) {
        if spec.name != entry.name || spec.shape != entry.shape {
            return Err(Error::MalformedHeader(format!(
                "tensor {} {:?} does not match the model's {} {:?}",
                entry.name, entry.shape, spec.name, spec.shape
            )));
        }
        let size = entry.dtype.size();
        let raw = take(bytes, offset, spec.len() * size)?;
        let dst = &mut params[spec.offset..spec.offset + spec.len()];
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(size)) {
            *d = match entry.dtype {
                Dtype::F32 => f64::from(f32::from_le_bytes(chunk.try_into().expect("four bytes"))),
                Dtype::F64 => f64::from_le_bytes(chunk.try_into().expect("eight bytes")),
            };
        }
        offset += raw.len();
    }
    if offset != bytes.len() {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - offset
        )));
    }
    Ok((MlpDenoiser::from_parts(header.model, params)?, header.run_config))
}

pub fn save_checkpoint(net: &MlpDenoiser, config: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net, config)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(MlpDenoiser, RunConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
