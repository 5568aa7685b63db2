use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NoiseType, Partition, SpeechSpan};
use crate::error::{Error, Result};
use crate::store::write_atomic;

/// One line of `manifest.jsonl`. Paths are relative to the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub audio: String,
    pub labels: String,
    pub noise: NoiseType,
    pub snr_db: Option<f64>,
    pub partition: Partition,
    pub duration_s: f64,
}

impl ManifestEntry {
    /// Recording path without extension, relative to the manifest directory.
    pub fn stem(&self) -> &str {
        self.audio.strip_suffix(".wav").unwrap_or(&self.audio)
    }
}

/// Entries plus the directory their relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn partition(&self, partition: Partition) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.partition == partition).collect()
    }
}

/// Labels sidecar: speech spans and the utterances they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSidecar {
    pub spans: Vec<SpeechSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            entry: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(Manifest {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
    })
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelSidecar) -> Result<()> {
    let json = serde_json::to_string(labels).expect("labels serialize");
    write_atomic(path.as_ref(), json.as_bytes())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelSidecar> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub entries: usize,
    pub per_partition: BTreeMap<String, usize>,
    pub speakers_checked: bool,
}

/// Checks every entry: referenced files exist, spans are sorted, disjoint and
/// inside the recording, `snr_db` is null exactly for clean entries, and no
/// speaker (taken from `speaker/utterance` source ids) spans two partitions.
pub fn validate_manifest(manifest: &Manifest) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let mut speakers: BTreeMap<String, BTreeSet<Partition>> = BTreeMap::new();
    for e in &manifest.entries {
        let fail = |message: String| Error::Manifest {
            entry: e.audio.clone(),
            message,
        };
        let audio = manifest.resolve(&e.audio);
        if !audio.is_file() {
            return Err(fail(format!("audio file {} is missing", audio.display())));
        }
        let labels_path = manifest.resolve(&e.labels);
        if !labels_path.is_file() {
            return Err(fail(format!("labels file {} is missing", labels_path.display())));
        }
        if (e.noise == NoiseType::Clean) != e.snr_db.is_none() {
            return Err(fail("snr_db must be null exactly for clean recordings".into()));
        }
        if !(e.duration_s.is_finite() && e.duration_s >= 0.0) {
            return Err(fail(format!("invalid duration {}", e.duration_s)));
        }
        let labels = read_labels(&labels_path).map_err(|err| fail(err.to_string()))?;
        let mut prev_end = 0.0;
        for s in &labels.spans {
            if !(s.start >= prev_end && s.start < s.end) {
                return Err(fail(format!("span [{}, {}) unsorted, overlapping or empty", s.start, s.end)));
            }
            prev_end = s.end;
        }
        if prev_end > e.duration_s + 1e-9 {
            return Err(fail(format!("span ends at {prev_end} s past duration {} s", e.duration_s)));
        }
        for src in &labels.sources {
            if let Some((spk, _)) = src.split_once('/') {
                speakers.entry(spk.to_string()).or_default().insert(e.partition);
                report.speakers_checked = true;
            }
        }
        report.entries += 1;
        *report.per_partition.entry(e.partition.name().to_string()).or_default() += 1;
    }
    if let Some((spk, parts)) = speakers.iter().find(|(_, p)| p.len() > 1) {
        let names: Vec<_> = parts.iter().map(|p| p.name()).collect();
        return Err(Error::Manifest {
            entry: format!("speaker {spk}"),
            message: format!("appears in partitions {}", names.join(", ")),
        });
    }
    Ok(report)
}
