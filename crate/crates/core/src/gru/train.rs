use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{backward, forward, Adam, GruVadConfig, GruVadParams, HiddenState};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics::auc_value;
use crate::seed::rng_for;

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// One recording: features and a ±1 label per frame.
#[derive(Debug, Clone)]
pub struct TrainSequence {
    pub features: FeatureMatrix,
    pub labels: Vec<i8>,
}

impl TrainSequence {
    pub fn new(features: FeatureMatrix, labels: Vec<i8>) -> Result<Self> {
        if features.frames() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature frames vs {} labels",
                features.frames(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean chunk loss over the epoch.
    pub train_loss: f64,
    pub dev_auc: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub best_epoch: usize,
    pub optimizer_steps: u64,
}

impl TrainReport {
    pub fn best_dev_auc(&self) -> f64 {
        self.epochs[self.best_epoch].dev_auc
    }
}

/// Frame ranges of the chunks of a `frames`-long sequence. A trailing
/// partial chunk is dropped unless it is the only one.
fn chunk_ranges(frames: usize, chunk: usize) -> Vec<(usize, usize)> {
    if frames == 0 {
        return Vec::new();
    }
    if frames < chunk {
        return vec![(0, frames)];
    }
    (0..frames / chunk).map(|k| (k * chunk, (k + 1) * chunk)).collect()
}

/// Pooled AUC of `params` over `data`, each sequence scored from a zero state.
pub fn pooled_auc(params: &GruVadParams, data: &[TrainSequence]) -> Result<f64> {
    let scored: Vec<Vec<f64>> = data
        .par_iter()
        .map(|s| forward(params, &s.features, None).map(|(scores, _)| scores))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = scored.concat();
    let labels: Vec<i8> = data.iter().flat_map(|s| s.labels.iter().copied()).collect();
    auc_value(&scores, &labels)
}

/// Trains with Adam over truncated-BPTT chunks and returns the parameters of
/// the epoch with the best dev AUC (earliest on ties), rounded to f32.
pub fn train(config: &GruVadConfig, train_set: &[TrainSequence], dev_set: &[TrainSequence]) -> Result<(GruVadParams, TrainReport)> {
    config.validate()?;
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    }
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::EmptyInput("training needs train and dev sequences"));
    }
    for s in train_set.iter().chain(dev_set) {
        if s.features.dims() != config.input_dim {
            return Err(Error::Shape(format!(
                "features have {} dims, config says {}",
                s.features.dims(),
                config.input_dim
            )));
        }
        if s.features.frames() != s.labels.len() {
            return Err(Error::Shape("features and labels are not aligned".into()));
        }
    }

    let mut params = GruVadParams::init(config, &mut rng_for(config.seed, &[INIT_STREAM]));
    params.quantize_f32();
    let mut adam = Adam::new(config, &params);
    let mut shuffle_rng = rng_for(config.seed, &[SHUFFLE_STREAM]);
    let targets: Vec<Vec<f64>> = train_set
        .iter()
        .map(|s| s.labels.iter().map(|&l| l as f64).collect())
        .collect();

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, GruVadParams)> = None;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut n_chunks) = (0.0, 0usize);
        let mut chunk_no = 0usize;
        for batch in order.chunks(config.batch) {
            let mut batch = batch.to_vec();
            batch.sort_by_key(|&i| (train_set[i].features.frames(), i));
            let ranges: Vec<_> = batch
                .iter()
                .map(|&i| chunk_ranges(train_set[i].features.frames(), config.bptt_chunk))
                .collect();
            let mut states: Vec<Option<HiddenState>> = vec![None; batch.len()];
            let depth = ranges.iter().map(Vec::len).max().unwrap_or(0);
            for k in 0..depth {
                let mut grad = params.zeros_like();
                let mut members = 0usize;
                let mut step_loss = 0.0;
                for (m, &i) in batch.iter().enumerate() {
                    let Some(&(a, b)) = ranges[m].get(k) else { continue };
                    let seq = &train_set[i];
                    let out = backward(
                        &params,
                        &seq.features.slice_frames(a, b),
                        &targets[i][a..b],
                        states[m].as_ref(),
                        config.loss,
                    )?;
                    grad.add_scaled(&out.grads, 1.0);
                    step_loss += out.loss;
                    states[m] = Some(out.h_final);
                    members += 1;
                }
                if !step_loss.is_finite() {
                    return Err(Error::Divergence { epoch, chunk: chunk_no });
                }
                let inv = 1.0 / members as f64;
                grad.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|g| *g *= inv));
                adam.step(&mut params, &grad);
                if !params.is_finite() {
                    return Err(Error::Divergence { epoch, chunk: chunk_no });
                }
                loss_sum += step_loss;
                n_chunks += members;
                chunk_no += 1;
            }
        }
        let mut snapshot = params.clone();
        snapshot.quantize_f32();
        let dev_auc = pooled_auc(&snapshot, dev_set)?;
        let report = EpochReport {
            epoch,
            train_loss: loss_sum / n_chunks.max(1) as f64,
            dev_auc,
            wall_s: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.5}, dev AUC {:.4} ({:.1} s)",
            report.train_loss,
            report.dev_auc,
            report.wall_s
        );
        epochs.push(report);
        if best.as_ref().is_none_or(|(_, a, _)| dev_auc > *a) {
            best = Some((epoch, dev_auc, snapshot));
        }
    }
    let (best_epoch, _, best_params) = best.expect("at least one epoch");
    Ok((
        best_params,
        TrainReport {
            epochs,
            best_epoch,
            optimizer_steps: adam.steps(),
        },
    ))
}
