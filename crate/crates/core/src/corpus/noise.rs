use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Partition;
use crate::audio::{read_wav, resample, AudioClip};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseType {
    Clean,
    White,
    Ads,
    Music,
    News,
    #[serde(rename = "talkshows")]
    TalkShows,
}

impl NoiseType {
    pub const NOISY: [NoiseType; 5] = [
        NoiseType::White,
        NoiseType::Ads,
        NoiseType::Music,
        NoiseType::News,
        NoiseType::TalkShows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseType::Clean => "clean",
            NoiseType::White => "white",
            NoiseType::Ads => "ads",
            NoiseType::Music => "music",
            NoiseType::News => "news",
            NoiseType::TalkShows => "talkshows",
        }
    }
}

impl std::fmt::Display for NoiseType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NoiseType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clean" => Ok(NoiseType::Clean),
            "white" => Ok(NoiseType::White),
            "ads" => Ok(NoiseType::Ads),
            "music" => Ok(NoiseType::Music),
            "news" => Ok(NoiseType::News),
            "talkshows" | "talk_shows" | "talkshow" => Ok(NoiseType::TalkShows),
            other => Err(Error::InvalidArgument(format!("unknown noise type {other:?}"))),
        }
    }
}

/// Zero-mean unit-variance Gaussian noise, peak-normalized to 0.3.
pub fn white_noise(n_samples: usize, sample_rate: u32, seed: u64) -> AudioClip {
    let mut rng = rng_for(seed, &[0x5748_4954]);
    let mut samples: Vec<f64> = (0..n_samples).map(|_| StandardNormal.sample(&mut rng)).collect();
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|s| *s *= 0.3 / peak);
    }
    AudioClip::new(samples, sample_rate).expect("finite noise")
}

/// Noise material reserved for one partition. `region_start` locates the
/// stream inside the concatenated material of its noise type so slices from
/// different partitions can be checked for overlap.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    pub clip: AudioClip,
    pub region_start: usize,
}

/// Bookkeeping record for one noise slice used in a mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSlice {
    pub noise: NoiseType,
    pub partition: Partition,
    /// Global sample range within the noise type's material.
    pub start: usize,
    pub end: usize,
}

/// Per-type noise material split disjointly into train/dev/test streams.
#[derive(Debug, Clone, Default)]
pub struct NoiseBank {
    streams: BTreeMap<NoiseType, [NoiseStream; 3]>,
}

impl NoiseBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Splits one stream into three contiguous, equal, disjoint thirds.
    pub fn insert_split(&mut self, noise: NoiseType, material: AudioClip) -> Result<()> {
        if noise == NoiseType::Clean {
            return Err(Error::InvalidArgument("clean is not a noise type".into()));
        }
        let third = material.len() / 3;
        let part = |i: usize| NoiseStream {
            clip: material.slice(i * third, (i + 1) * third),
            region_start: i * third,
        };
        self.streams.insert(noise, [part(0), part(1), part(2)]);
        Ok(())
    }

    /// Generates independent white-noise material per partition.
    pub fn insert_white(&mut self, seconds_per_partition: f64, sample_rate: u32, seed: u64) {
        let n = (seconds_per_partition * sample_rate as f64).ceil() as usize;
        let part = |i: usize| NoiseStream {
            clip: white_noise(n, sample_rate, crate::seed::derive_seed(seed, &[i as u64])),
            region_start: i * n,
        };
        self.streams.insert(NoiseType::White, [part(0), part(1), part(2)]);
    }

    /// Reads `dir/<type>/*.wav` for each requested type (sorted by name),
    /// resamples to `sample_rate`, concatenates and splits into thirds.
    /// White noise without a directory is generated instead.
    pub fn from_dir(
        dir: Option<&Path>,
        types: &[NoiseType],
        sample_rate: u32,
        white_seconds_per_partition: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut bank = NoiseBank::new();
        for &t in types {
            let sub = dir.map(|d| d.join(t.name())).filter(|p| p.is_dir());
            match (t, sub) {
                (NoiseType::Clean, _) => continue,
                (_, Some(sub)) => {
                    let mut files: Vec<_> = std::fs::read_dir(&sub)
                        .map_err(|e| Error::io(&sub, e))?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                        .collect();
                    files.sort();
                    let mut material = Vec::new();
                    for f in &files {
                        material.extend(resample(&read_wav(f)?, sample_rate)?.into_samples());
                    }
                    if material.is_empty() {
                        return Err(Error::Coverage(format!("no noise audio found in {}", sub.display())));
                    }
                    bank.insert_split(t, AudioClip::new(material, sample_rate)?)?;
                }
                (NoiseType::White, None) => bank.insert_white(white_seconds_per_partition, sample_rate, seed),
                (_, None) => {
                    return Err(Error::Coverage(format!(
                        "no noise material for {t}: expected a directory <noise-bank>/{}",
                        t.name()
                    )))
                }
            }
        }
        Ok(bank)
    }

    pub fn stream(&self, noise: NoiseType, partition: Partition) -> Option<&NoiseStream> {
        self.streams.get(&noise).map(|s| &s[partition.index()])
    }

    pub fn types(&self) -> impl Iterator<Item = NoiseType> + '_ {
        self.streams.keys().copied()
    }
}

/// Checks that no two partitions drew from overlapping noise material.
pub(crate) fn check_disjoint(slices: &[NoiseSlice]) -> Result<()> {
    for (i, a) in slices.iter().enumerate() {
        for b in &slices[i + 1..] {
            if a.noise == b.noise && a.partition != b.partition && a.start < b.end && b.start < a.end {
                return Err(Error::Coverage(format!(
                    "{} noise shared between {} and {}",
                    a.noise,
                    a.partition.name(),
                    b.partition.name()
                )));
            }
        }
    }
    Ok(())
}
