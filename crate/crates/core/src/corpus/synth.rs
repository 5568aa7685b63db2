use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{write_labels, write_manifest, LabelSidecar, ManifestEntry};
use super::mix::mix_noise_detailed;
use super::noise::check_disjoint;
use super::pause::sample_pause;
use super::{LabeledRecording, NoiseBank, NoiseSlice, NoiseType, Partition, PauseModel, SpeechSpan};
use crate::audio::{read_wav, resample, write_wav, AudioClip, CANONICAL_RATE};
use crate::error::{Error, Result};
use crate::seed::rng_for;

// stream tags for derived seeds
const ORDER: u64 = 1;
const GROUP: u64 = 2;
const MIX: u64 = 3;

/// A source utterance. `id` is `speaker/name`.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub clip: AudioClip,
}

/// Per-partition recording budget, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTargets {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl PartitionTargets {
    pub fn uniform(seconds: f64) -> Self {
        Self {
            train: seconds,
            dev: seconds,
            test: seconds,
        }
    }

    pub fn get(&self, p: Partition) -> f64 {
        match p {
            Partition::Train => self.train,
            Partition::Dev => self.dev,
            Partition::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub noise_types: Vec<NoiseType>,
    pub snrs: Vec<f64>,
    /// Emit a clean copy of every recording alongside the noisy ones.
    pub include_clean: bool,
    /// Minimum total recording duration per partition (per condition).
    pub targets: PartitionTargets,
    /// Utterances are grouped into recordings of at least this length.
    pub recording_duration: f64,
    pub pause: PauseModel,
    pub sample_rate: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            noise_types: NoiseType::NOISY.to_vec(),
            snrs: vec![5.0, 10.0, 15.0],
            include_clean: true,
            targets: PartitionTargets::uniform(7200.0),
            recording_duration: 60.0,
            pause: PauseModel::default(),
            sample_rate: CANONICAL_RATE,
        }
    }
}

impl SynthConfig {
    fn conditions(&self) -> Vec<(NoiseType, Option<f64>)> {
        let clean = self.include_clean.then_some((NoiseType::Clean, None));
        clean
            .into_iter()
            .chain(
                self.noise_types
                    .iter()
                    .filter(|&&t| t != NoiseType::Clean)
                    .flat_map(|&t| self.snrs.iter().map(move |&s| (t, Some(s)))),
            )
            .collect()
    }
}

/// Joins clips with explicit pause durations (seconds) between consecutive
/// utterances. Spans cover exactly the utterance samples.
pub fn concatenate_with_pauses(utterances: &[&AudioClip], pauses: &[f64]) -> Result<LabeledRecording> {
    let first = utterances.first().ok_or(Error::EmptyInput("no utterances to concatenate"))?;
    if pauses.len() + 1 != utterances.len() {
        return Err(Error::InvalidArgument(format!(
            "{} utterances need {} pauses, got {}",
            utterances.len(),
            utterances.len() - 1,
            pauses.len()
        )));
    }
    let sr = first.sample_rate();
    let mut samples = Vec::new();
    let mut spans = Vec::with_capacity(utterances.len());
    for (i, u) in utterances.iter().enumerate() {
        if u.sample_rate() != sr {
            return Err(Error::RateMismatch {
                expected: sr,
                found: u.sample_rate(),
            });
        }
        if i > 0 {
            let n = (pauses[i - 1] * sr as f64).round() as usize;
            samples.resize(samples.len() + n, 0.0);
        }
        let start = samples.len();
        samples.extend_from_slice(u.samples());
        if u.len() > 0 {
            spans.push(SpeechSpan {
                start: start as f64 / sr as f64,
                end: samples.len() as f64 / sr as f64,
            });
        }
    }
    Ok(LabeledRecording {
        audio: AudioClip::new(samples, sr)?,
        spans,
        noise_type: NoiseType::Clean,
        snr_db: None,
        source_ids: Vec::new(),
    })
}

/// Joins clips with pauses drawn from `model` between them.
pub fn concatenate<R: rand::Rng + ?Sized>(
    utterances: &[&AudioClip],
    model: &PauseModel,
    rng: &mut R,
) -> Result<LabeledRecording> {
    if utterances.is_empty() {
        return Err(Error::EmptyInput("no utterances to concatenate"));
    }
    let pauses = (1..utterances.len())
        .map(|_| sample_pause(model, rng))
        .collect::<Result<Vec<_>>>()?;
    concatenate_with_pauses(utterances, &pauses)
}

/// Reads `dir/<speaker>/*.wav` (speaker = subdirectory name) and top-level
/// `dir/*.wav` (speaker = file stem), resampled to `sample_rate`.
pub fn load_utterances(dir: &Path, sample_rate: u32) -> Result<Vec<Utterance>> {
    let mut found: Vec<(String, std::path::PathBuf)> = Vec::new();
    let is_wav = |p: &Path| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"));
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            let speaker = path.file_name().unwrap().to_string_lossy().into_owned();
            for f in std::fs::read_dir(&path).map_err(|e| Error::io(&path, e))? {
                let f = f.map_err(|e| Error::io(&path, e))?.path();
                if is_wav(&f) {
                    found.push((speaker.clone(), f));
                }
            }
        } else if is_wav(&path) {
            found.push((stem(&path), path));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(speaker, path)| {
            let clip = resample(&read_wav(&path)?, sample_rate)?;
            Ok(Utterance {
                id: format!("{speaker}/{}", stem(&path)),
                speaker,
                clip,
            })
        })
        .collect()
}

/// Assigns whole speakers to partitions so each partition's share of audio
/// tracks `targets`. Largest speakers are placed first, each into the
/// partition furthest below its target.
pub fn split_by_speaker(utterances: Vec<Utterance>, targets: &PartitionTargets) -> [Vec<Utterance>; 3] {
    let mut by_speaker: BTreeMap<String, Vec<Utterance>> = BTreeMap::new();
    for u in utterances {
        by_speaker.entry(u.speaker.clone()).or_default().push(u);
    }
    let mut speakers: Vec<(String, Vec<Utterance>)> = by_speaker.into_iter().collect();
    let dur = |us: &[Utterance]| us.iter().map(|u| u.clip.duration()).sum::<f64>();
    speakers.sort_by(|a, b| dur(&b.1).total_cmp(&dur(&a.1)).then_with(|| a.0.cmp(&b.0)));
    let mut out: [Vec<Utterance>; 3] = Default::default();
    let mut assigned = [0.0f64; 3];
    for (_, us) in speakers {
        let pick = Partition::ALL
            .iter()
            .filter(|p| targets.get(**p) > 0.0)
            .min_by(|a, b| {
                let ra = assigned[a.index()] / targets.get(**a);
                let rb = assigned[b.index()] / targets.get(**b);
                ra.total_cmp(&rb)
            });
        if let Some(p) = pick {
            assigned[p.index()] += dur(&us);
            out[p.index()].extend(us);
        }
    }
    out
}

/// Files and bookkeeping produced for one partition.
#[derive(Debug, Clone, Default)]
pub struct PartitionOutput {
    pub entries: Vec<ManifestEntry>,
    pub slices: Vec<NoiseSlice>,
}

struct Group {
    members: Vec<usize>,
    pauses: Vec<f64>,
    duration: f64,
}

fn condition_tag(noise: NoiseType, snr: Option<f64>) -> String {
    match snr {
        None => noise.name().to_string(),
        Some(s) if s.fract() == 0.0 => format!("{}_snr{}", noise.name(), s as i64),
        Some(s) => format!("{}_snr{}", noise.name(), s.to_string().replace('.', "p").replace('-', "m")),
    }
}

/// Builds one partition: utterances are shuffled, grouped into recordings of
/// at least `recording_duration`, and every recording is rendered clean (if
/// enabled) and under each noise type × SNR. Writes WAVs and label sidecars
/// under `out_dir/<partition>/`. A pure function of inputs and seed.
pub fn synthesize_partition(
    utterances: &[Utterance],
    bank: &NoiseBank,
    config: &SynthConfig,
    partition: Partition,
    seed: u64,
    out_dir: &Path,
) -> Result<PartitionOutput> {
    config.pause.validate()?;
    let p_tag = partition.index() as u64;
    let target = config.targets.get(partition);
    if target <= 0.0 {
        return Ok(PartitionOutput::default());
    }
    let sr = config.sample_rate;
    if let Some(u) = utterances.iter().find(|u| u.clip.sample_rate() != sr) {
        return Err(Error::RateMismatch {
            expected: sr,
            found: u.clip.sample_rate(),
        });
    }

    let mut order: Vec<usize> = (0..utterances.len()).collect();
    order.sort_by(|&a, &b| utterances[a].id.cmp(&utterances[b].id));
    order.shuffle(&mut rng_for(seed, &[p_tag, ORDER]));

    let mut groups: Vec<Group> = Vec::new();
    let mut total = 0.0;
    let mut queue = order.into_iter().peekable();
    while total < target && queue.peek().is_some() {
        let mut rng = rng_for(seed, &[p_tag, GROUP, groups.len() as u64]);
        let mut g = Group {
            members: Vec::new(),
            pauses: Vec::new(),
            duration: 0.0,
        };
        while g.duration < config.recording_duration {
            let Some(i) = queue.next() else { break };
            if !g.members.is_empty() {
                let p = sample_pause(&config.pause, &mut rng)?;
                g.duration += (p * sr as f64).round() / sr as f64;
                g.pauses.push(p);
            }
            g.duration += utterances[i].clip.duration();
            g.members.push(i);
        }
        total += g.duration;
        groups.push(g);
    }
    if total < target {
        return Err(Error::Coverage(format!(
            "{}: utterances yield only {total:.1} s of recordings, {target:.1} s requested",
            partition.name()
        )));
    }

    let conditions = config.conditions();
    let longest = groups.iter().map(|g| g.duration).fold(0.0, f64::max);
    for &(noise, _) in conditions.iter().filter(|c| c.1.is_some()) {
        let available = bank.stream(noise, partition).map_or(0.0, |s| s.clip.duration());
        if available < longest {
            return Err(Error::Coverage(format!(
                "{noise} noise for {}: {available:.1} s available, recordings need {longest:.1} s",
                partition.name()
            )));
        }
    }

    let part_dir = out_dir.join(partition.name());
    std::fs::create_dir_all(&part_dir).map_err(|e| Error::io(&part_dir, e))?;

    let rendered: Vec<(ManifestEntry, Option<NoiseSlice>)> = groups
        .par_iter()
        .enumerate()
        .map(|(gi, g)| -> Result<Vec<_>> {
            let clips: Vec<&AudioClip> = g.members.iter().map(|&i| &utterances[i].clip).collect();
            let clean = concatenate_with_pauses(&clips, &g.pauses)?;
            let sources: Vec<String> = g.members.iter().map(|&i| utterances[i].id.clone()).collect();
            conditions
                .iter()
                .enumerate()
                .map(|(ci, &(noise, snr))| {
                    let (audio, slice) = match snr {
                        None => (clean.audio.clone(), None),
                        Some(snr) => {
                            let stream = bank.stream(noise, partition).expect("checked above");
                            let mut rng = rng_for(seed, &[p_tag, MIX, gi as u64, ci as u64]);
                            let m = mix_noise_detailed(&clean.audio, &stream.clip, snr, &mut rng)?;
                            let start = stream.region_start + m.noise_offset;
                            let slice = NoiseSlice {
                                noise,
                                partition,
                                start,
                                end: start + clean.audio.len(),
                            };
                            (m.mixed, Some(slice))
                        }
                    };
                    let name = format!("{}_{gi:03}_{}", partition.name(), condition_tag(noise, snr));
                    let audio_rel = format!("{}/{name}.wav", partition.name());
                    let labels_rel = format!("{}/{name}.labels.json", partition.name());
                    write_wav(&audio, out_dir.join(&audio_rel))?;
                    write_labels(
                        out_dir.join(&labels_rel),
                        &LabelSidecar {
                            spans: clean.spans.clone(),
                            sources: sources.clone(),
                        },
                    )?;
                    let entry = ManifestEntry {
                        audio: audio_rel,
                        labels: labels_rel,
                        noise,
                        snr_db: snr,
                        partition,
                        duration_s: audio.duration(),
                    };
                    Ok((entry, slice))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut out = PartitionOutput::default();
    for (entry, slice) in rendered {
        out.entries.push(entry);
        out.slices.extend(slice);
    }
    Ok(out)
}

/// Splits utterances by speaker, synthesizes all three partitions and writes
/// `out_dir/manifest.jsonl`.
pub fn synthesize_corpus(
    utterances: Vec<Utterance>,
    bank: &NoiseBank,
    config: &SynthConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<PartitionOutput> {
    let parts = split_by_speaker(utterances, &config.targets);
    let mut all = PartitionOutput::default();
    for p in Partition::ALL {
        let out = synthesize_partition(&parts[p.index()], bank, config, p, seed, out_dir)?;
        all.entries.extend(out.entries);
        all.slices.extend(out.slices);
    }
    check_disjoint(&all.slices)?;
    write_manifest(out_dir.join("manifest.jsonl"), &all.entries)?;
    Ok(all)
}
