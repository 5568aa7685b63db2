use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::auc_value;
use crate::corpus::{ManifestEntry, NoiseType};
use crate::error::{Error, Result};
use crate::features::{normalize_instance, Normalization};
use crate::gru::{forward, GruVadParams, TrainSequence};
use crate::store::write_atomic;

/// Test condition: noise type plus SNR (none for clean audio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub noise: NoiseType,
    pub snr_db: Option<f64>,
}

impl Condition {
    pub fn of(entry: &ManifestEntry) -> Self {
        Self {
            noise: entry.noise,
            snr_db: entry.snr_db,
        }
    }

    /// Ordering key: noise type, then SNR with clean first.
    fn key(&self) -> (NoiseType, i64) {
        (self.noise, self.snr_db.map_or(i64::MIN, |s| (s * 1000.0).round() as i64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub noise: NoiseType,
    pub snr_db: Option<f64>,
    pub auc: f64,
    pub n_recordings: usize,
    pub n_frames: usize,
}

/// AUC per condition, their unweighted mean, and the AUC over every frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTable {
    pub representation: String,
    pub pooling: Pooling,
    pub rows: Vec<ConditionRow>,
    pub macro_auc: f64,
    pub pooled_auc: f64,
}

impl ConditionTable {
    pub fn get(&self, noise: NoiseType, snr_db: Option<f64>) -> Option<&ConditionRow> {
        self.rows.iter().find(|r| r.noise == noise && r.snr_db == snr_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Frames of all recordings in a condition share one ROC.
    Frames,
    /// One AUC per recording, averaged within the condition.
    PerRecording,
}

/// Scores every sequence from a zero state after normalization.
fn score_all(params: &GruVadParams, data: &[(ManifestEntry, TrainSequence)], norm: &Normalization) -> Result<Vec<Vec<f64>>> {
    data.par_iter()
        .map(|(_, s)| forward(params, &norm.apply(&s.features)?, None).map(|(scores, _)| scores))
        .collect()
}

fn condition_groups(data: &[(ManifestEntry, TrainSequence)]) -> Vec<(Condition, Vec<usize>)> {
    let mut groups: BTreeMap<(NoiseType, i64), (Condition, Vec<usize>)> = BTreeMap::new();
    for (i, (entry, _)) in data.iter().enumerate() {
        let c = Condition::of(entry);
        groups.entry(c.key()).or_insert((c, Vec::new())).1.push(i);
    }
    groups.into_values().collect()
}

fn build_table(
    representation: &str,
    data: &[(ManifestEntry, TrainSequence)],
    scores: &[Vec<f64>],
    pooling: Pooling,
) -> Result<ConditionTable> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no recordings to evaluate"));
    }
    let pool = |idx: &[usize]| -> Result<f64> {
        let s: Vec<f64> = idx.iter().flat_map(|&i| scores[i].iter().copied()).collect();
        let l: Vec<i8> = idx.iter().flat_map(|&i| data[i].1.labels.iter().copied()).collect();
        auc_value(&s, &l)
    };
    let mut rows = Vec::new();
    for (c, idx) in condition_groups(data) {
        let auc = match pooling {
            Pooling::Frames => pool(&idx)?,
            Pooling::PerRecording => {
                let per: Vec<f64> = idx.iter().map(|&i| pool(&[i])).collect::<Result<_>>()?;
                per.iter().sum::<f64>() / per.len() as f64
            }
        };
        rows.push(ConditionRow {
            noise: c.noise,
            snr_db: c.snr_db,
            auc,
            n_recordings: idx.len(),
            n_frames: idx.iter().map(|&i| scores[i].len()).sum(),
        });
    }
    let macro_auc = rows.iter().map(|r| r.auc).sum::<f64>() / rows.len() as f64;
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(ConditionTable {
        representation: representation.to_owned(),
        pooling,
        rows,
        macro_auc,
        pooled_auc: pool(&all)?,
    })
}

/// AUC per `(noise, snr)` condition of the evaluated recordings.
pub fn evaluate(
    params: &GruVadParams,
    data: &[(ManifestEntry, TrainSequence)],
    representation: &str,
    norm: &Normalization,
    pooling: Pooling,
) -> Result<ConditionTable> {
    let scores = score_all(params, data, norm)?;
    build_table(representation, data, &scores, pooling)
}

/// The grid swept by default, as fractions of each recording.
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.04, 0.08, 0.16, 0.32, 0.64, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub fraction: f64,
    /// Mean window length over recordings.
    pub buffer_seconds: f64,
    pub table: ConditionTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub representation: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn pooled(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.fraction, p.table.pooled_auc)).collect()
    }
}

/// Scores of one recording when only `window` frames are visible at a time:
/// each window is instance-normalized on its own and scored from a zero state.
pub fn windowed_scores(params: &GruVadParams, seq: &TrainSequence, window: usize) -> Result<Vec<f64>> {
    let n = seq.features.frames();
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let w = normalize_instance(&seq.features.slice_frames(start, end));
        out.extend(forward(params, &w, None)?.0);
        start = end;
    }
    Ok(out)
}

/// Re-scores the recordings with buffers of `fraction × duration`, under
/// per-instance normalization inside each buffer.
pub fn buffer_sweep(
    params: &GruVadParams,
    data: &[(ManifestEntry, TrainSequence)],
    representation: &str,
    fractions: &[f64],
    pooling: Pooling,
) -> Result<SweepResult> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no recordings to sweep"));
    }
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
        }
        let windows: Vec<usize> = data
            .iter()
            .map(|(_, s)| (fraction * s.features.frames() as f64).floor() as usize)
            .collect();
        if let Some(i) = windows.iter().position(|&w| w == 0) {
            return Err(Error::WindowTooSmall {
                fraction,
                frames: data[i].1.features.frames(),
            });
        }
        let scores: Vec<Vec<f64>> = data
            .par_iter()
            .zip(&windows)
            .map(|((_, s), &w)| windowed_scores(params, s, w))
            .collect::<Result<_>>()?;
        let buffer_seconds = data.iter().map(|(e, _)| fraction * e.duration_s).sum::<f64>() / data.len() as f64;
        points.push(SweepPoint {
            fraction,
            buffer_seconds,
            table: build_table(representation, data, &scores, pooling)?,
        });
    }
    Ok(SweepResult {
        representation: representation.to_owned(),
        points,
    })
}

fn snr_field(snr: Option<f64>) -> String {
    snr.map(|s| s.to_string()).unwrap_or_default()
}

/// `representation,noise,snr,fraction,auc` rows: one per condition, then
/// `macro` and `pooled` summary rows, for each fraction.
pub fn results_csv(tables: &[(f64, &ConditionTable)]) -> String {
    let mut out = String::from("representation,noise,snr,fraction,auc\n");
    for (fraction, t) in tables {
        for r in &t.rows {
            let _ = writeln!(out, "{},{},{},{},{}", t.representation, r.noise, snr_field(r.snr_db), fraction, r.auc);
        }
        let _ = writeln!(out, "{},macro,,{},{}", t.representation, fraction, t.macro_auc);
        let _ = writeln!(out, "{},pooled,,{},{}", t.representation, fraction, t.pooled_auc);
    }
    out
}

/// Writes `results.csv` and `results.json` into `dir`.
pub fn write_results<T: Serialize>(dir: &Path, tables: &[(f64, &ConditionTable)], json: &T) -> Result<()> {
    write_atomic(&dir.join("results.csv"), results_csv(tables).as_bytes())?;
    let text = serde_json::to_string_pretty(json).expect("results serialize");
    write_atomic(&dir.join("results.json"), text.as_bytes())
}
