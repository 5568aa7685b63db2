//! Binary feature files (`VFE1`), normalization statistics (`VNS1`) and label
//! alignment between frame rates.
//!
//! `VFE1` layout, little-endian:
//!
//! ```text
//! "VFE1" | u32 n_frames | u32 dims | f32 hop_seconds | u8 source_tag | f32[n_frames * dims]
//! ```
//!
//! Values are stored as float32, so `load(save(x))` reproduces `x` bit for
//! bit whenever `x` holds float32-representable values.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSource, NormStats, STD_FLOOR};

const VFE_MAGIC: &[u8; 4] = b"VFE1";
const VNS_MAGIC: &[u8; 4] = b"VNS1";
const VFE_HEADER: usize = 4 + 4 + 4 + 4 + 1;

/// Parsed `VFE1` header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFileHeader {
    pub n_frames: u32,
    pub dims: u32,
    pub hop: f32,
    pub source: FeatureSource,
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_features(features: &FeatureMatrix) -> Result<Vec<u8>> {
    let frames = u32::try_from(features.frames())
        .map_err(|_| Error::InvalidArgument("too many frames for VFE1".into()))?;
    let dims = u32::try_from(features.dims())
        .map_err(|_| Error::InvalidArgument("too many dims for VFE1".into()))?;
    let mut out = Vec::with_capacity(VFE_HEADER + features.values().len() * 4);
    out.extend_from_slice(VFE_MAGIC);
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&dims.to_le_bytes());
    out.extend_from_slice(&(features.hop() as f32).to_le_bytes());
    out.push(features.source().tag());
    for v in features.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn parse_header(bytes: &[u8]) -> Result<FeatureFileHeader> {
    if bytes.len() < VFE_HEADER {
        return Err(Error::Format(format!(
            "VFE1 header truncated at byte offset {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != VFE_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?} at byte offset 0",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let hop = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if !(hop > 0.0 && hop.is_finite()) {
        return Err(Error::Format(format!("non-positive hop {hop} at byte offset 12")));
    }
    let source = FeatureSource::from_tag(bytes[16])
        .ok_or_else(|| Error::Format(format!("unknown source tag {} at byte offset 16", bytes[16])))?;
    Ok(FeatureFileHeader {
        n_frames: u32_at(4),
        dims: u32_at(8),
        hop,
        source,
    })
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let header = parse_header(bytes)?;
    let n = header.n_frames as usize * header.dims as usize;
    let payload = &bytes[VFE_HEADER..];
    if payload.len() != n * 4 {
        return Err(Error::Format(format!(
            "header claims {} x {} values ({} bytes) but payload ends at byte offset {}",
            header.n_frames,
            header.dims,
            n * 4,
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for (i, c) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(c.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "non-finite value at byte offset {}",
                VFE_HEADER + 4 * i
            )));
        }
        values.push(v as f64);
    }
    FeatureMatrix::new(
        values,
        header.n_frames as usize,
        header.dims as usize,
        f32_to_decimal_f64(header.hop),
        header.source,
    )
}

/// Widens through the shortest decimal form so 0.01f32 loads as 0.01.
fn f32_to_decimal_f64(v: f32) -> f64 {
    v.to_string().parse().expect("finite float formats")
}

pub fn save(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_features(features)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `VNS1` layout: `"VNS1" | u32 dims | f32[dims] mean | f32[dims] std`.
/// Frame counts are not persisted; loaded statistics report `n_frames == 0`.
pub fn encode_stats(stats: &NormStats) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + stats.dims() * 8);
    out.extend_from_slice(VNS_MAGIC);
    out.extend_from_slice(&(stats.dims() as u32).to_le_bytes());
    for v in stats.mean.iter().chain(&stats.std) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_stats(bytes: &[u8]) -> Result<NormStats> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!("VNS1 header truncated at byte offset {}", bytes.len())));
    }
    if &bytes[0..4] != VNS_MAGIC {
        return Err(Error::Format("bad VNS1 magic at byte offset 0".into()));
    }
    let dims = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + dims * 8 {
        return Err(Error::Format(format!(
            "VNS1 with {dims} dims needs {} bytes, file ends at byte offset {}",
            8 + dims * 8,
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let (mean, std) = vals.split_at(dims);
    Ok(NormStats {
        mean: mean.to_vec(),
        std: std.iter().map(|s| s.max(STD_FLOOR)).collect(),
        n_frames: 0,
    })
}

pub fn save_stats(stats: &NormStats, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_stats(stats))
}

pub fn load_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stats(&bytes)
}

/// Resamples a label sequence to another frame rate by nearest neighbour in
/// time: `out[i] = labels[round(i * target_hop / source_hop)]`, clamped to the
/// last label.
pub fn align_labels(labels: &[i8], source_hop: f64, target_hop: f64, target_frames: usize) -> Result<Vec<i8>> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no labels to align"));
    }
    if !(source_hop > 0.0 && target_hop > 0.0) {
        return Err(Error::InvalidArgument("hops must be positive".into()));
    }
    let ratio = target_hop / source_hop;
    let last = labels.len() - 1;
    Ok((0..target_frames)
        .map(|i| labels[((i as f64 * ratio).round() as usize).min(last)])
        .collect())
}
