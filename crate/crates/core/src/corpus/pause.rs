use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inter-utterance pause durations: a Gaussian truncated to
/// `[min_pause, max_pause]` by rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauseModel {
    pub mu: f64,
    pub sigma: f64,
    pub min_pause: f64,
    pub max_pause: f64,
    pub seed: u64,
}

impl Default for PauseModel {
    fn default() -> Self {
        Self {
            mu: 2.22,
            sigma: 1.83,
            min_pause: 0.1,
            max_pause: 6.0,
            seed: 0,
        }
    }
}

impl PauseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu.is_finite()
            && self.sigma.is_finite()
            && self.sigma >= 0.0
            && 0.0 < self.min_pause
            && self.min_pause <= self.max_pause
            && self.max_pause.is_finite();
        // a degenerate Gaussian outside the bounds would never be accepted
        let reachable = self.sigma > 0.0 || (self.min_pause..=self.max_pause).contains(&self.mu);
        if ok && reachable {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid pause model {self:?}")))
        }
    }
}

/// One pause duration in seconds.
pub fn sample_pause<R: Rng + ?Sized>(model: &PauseModel, rng: &mut R) -> Result<f64> {
    model.validate()?;
    if model.sigma == 0.0 {
        return Ok(model.mu);
    }
    let normal = Normal::new(model.mu, model.sigma)
        .map_err(|e| Error::InvalidArgument(format!("pause distribution: {e}")))?;
    loop {
        let p = normal.sample(rng);
        if (model.min_pause..=model.max_pause).contains(&p) {
            return Ok(p);
        }
    }
}
