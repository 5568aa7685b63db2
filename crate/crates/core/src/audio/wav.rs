use std::io::ErrorKind;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{Error, Result};

/// Result of a WAV export. `clipped` counts samples that were outside
/// `[-1, +1]` and got hard-clipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WavWriteStats {
    pub samples: usize,
    pub clipped: usize,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        // hound reports short reads as `Other`
        hound::Error::IoError(e) if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::Other) => {
            Error::Format(format!("{}: truncated file", path.display()))
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::Format(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => {
            Error::Unsupported(format!("{}: unsupported WAV encoding", path.display()))
        }
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads a PCM (8/16/24/32-bit) or float32 WAV file. Multichannel audio is
/// downmixed by averaging channels; integer PCM is scaled to `[-1, +1]`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    // past a successful open, any short read means the file is truncated
    let reader = WavReader::new(std::io::BufReader::new(file)).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Format(format!("{}: truncated file ({io})", path.display())),
        other => map_hound(path, other),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (format, bits) => {
            return Err(Error::Unsupported(format!(
                "{}: {bits}-bit {format:?} samples",
                path.display()
            )))
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(Error::Format(format!(
            "{}: sample count {} is not a multiple of {channels} channels",
            path.display(),
            interleaved.len()
        )));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate)
}

/// Writes a 16-bit little-endian mono PCM WAV. Out-of-range samples are
/// hard-clipped and counted.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<WavWriteStats> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    let mut stats = WavWriteStats {
        samples: clip.len(),
        clipped: 0,
    };
    for &s in clip.samples() {
        if !(-1.0..=1.0).contains(&s) {
            stats.clipped += 1;
        }
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))?;
    if stats.clipped > 0 {
        log::warn!(
            "{}: clipped {} of {} samples",
            path.display(),
            stats.clipped,
            stats.samples
        );
    }
    Ok(stats)
}
