//! `VGP1` checkpoints: magic, u32 version, u32 input_dim, u32 layers,
//! u32 hidden, u64 value count, then every tensor as f32 LE in
//! [`GruVadParams::tensors`] order.

use std::path::Path;

use super::GruVadParams;
use crate::error::{Error, Result};
use crate::store::write_atomic;

const MAGIC: &[u8; 4] = b"VGP1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 8;

pub fn encode_params(params: &GruVadParams) -> Vec<u8> {
    let n = params.n_values();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, params.input_dim() as u32, params.n_layers() as u32, params.hidden() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for t in params.tensors() {
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

pub fn decode_params(bytes: &[u8]) -> Result<GruVadParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "checkpoint truncated: {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("not a VGP1 checkpoint".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("checkpoint version {version} (supported: {VERSION})")));
    }
    let (input, layers, hidden) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize);
    let n = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != n.saturating_mul(4) {
        return Err(Error::Format(format!(
            "checkpoint truncated: {} payload bytes for {n} values",
            payload.len()
        )));
    }
    if input == 0 || layers == 0 || hidden == 0 {
        return Err(Error::Shape(format!("checkpoint dims {input}/{layers}/{hidden}")));
    }
    let mut params = GruVadParams::zeros(input, layers, hidden);
    if params.n_values() as u64 != n {
        return Err(Error::Shape(format!(
            "checkpoint holds {n} values, input {input} × {layers}L{hidden}N needs {}",
            params.n_values()
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v = values.next().unwrap());
    }
    if !params.is_finite() {
        return Err(Error::Format("checkpoint contains non-finite values".into()));
    }
    Ok(params)
}

pub fn save_params(path: &Path, params: &GruVadParams) -> Result<()> {
    write_atomic(path, &encode_params(params))
}

pub fn load_params(path: &Path) -> Result<GruVadParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes)
}
