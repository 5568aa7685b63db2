use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Lower bound applied to every standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_frames: usize,
}

impl NormStats {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }
}

/// Running Welford accumulator; partial accumulators merge exactly (Chan et al.).
#[derive(Debug, Clone)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dims: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dims],
            m2: vec![0.0; dims],
        }
    }

    fn push(&mut self, row: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(row) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    fn finish(self) -> NormStats {
        let n = self.n as f64;
        NormStats {
            std: self.m2.iter().map(|s| (s / n).max(0.0).sqrt().max(STD_FLOOR)).collect(),
            mean: self.mean,
            n_frames: self.n,
        }
    }
}

/// Fits statistics over every frame of every matrix in a single pass.
pub fn fit_stats<'a>(features: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<NormStats> {
    let mut total: Option<Moments> = None;
    for f in features {
        let acc = total.get_or_insert_with(|| Moments::new(f.dims()));
        if acc.mean.len() != f.dims() {
            return Err(Error::Shape(format!(
                "matrix dims {} vs {}",
                f.dims(),
                acc.mean.len()
            )));
        }
        let mut part = Moments::new(f.dims());
        f.rows().for_each(|r| part.push(r));
        acc.merge(&part);
    }
    match total {
        Some(m) if m.n > 0 => Ok(m.finish()),
        _ => Err(Error::EmptyInput("no frames to fit statistics on")),
    }
}

fn standardize(features: &FeatureMatrix, stats: &NormStats) -> FeatureMatrix {
    let dims = features.dims();
    let values = features
        .values()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = i % dims;
            (x - stats.mean[d]) / stats.std[d]
        })
        .collect();
    features.with_values(values)
}

pub fn normalize_global(features: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    if features.dims() != stats.dims() {
        return Err(Error::Shape(format!(
            "features have {} dims, statistics {}",
            features.dims(),
            stats.dims()
        )));
    }
    Ok(standardize(features, stats))
}

/// Inverse of [`normalize_global`].
pub fn denormalize(features: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    if features.dims() != stats.dims() {
        return Err(Error::Shape(format!(
            "features have {} dims, statistics {}",
            features.dims(),
            stats.dims()
        )));
    }
    let dims = features.dims();
    let values = features
        .values()
        .iter()
        .enumerate()
        .map(|(i, x)| x * stats.std[i % dims] + stats.mean[i % dims])
        .collect();
    Ok(features.with_values(values))
}

/// Standardizes with statistics of this matrix alone. An empty matrix is
/// returned unchanged.
pub fn normalize_instance(features: &FeatureMatrix) -> FeatureMatrix {
    if features.frames() == 0 {
        return features.clone();
    }
    let stats = fit_stats([features]).expect("non-empty matrix");
    standardize(features, &stats)
}

/// How features are standardized before scoring.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    None,
    Global(NormStats),
    Instance,
}

impl Normalization {
    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            Normalization::None => Ok(features.clone()),
            Normalization::Global(stats) => normalize_global(features, stats),
            Normalization::Instance => Ok(normalize_instance(features)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Global(_) => "global",
            Normalization::Instance => "instance",
        }
    }
}
