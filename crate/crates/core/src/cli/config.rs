use std::path::Path;

use serde::{Deserialize, Serialize};

use vadforge::corpus::SynthConfig;
use vadforge::features::MfbConfig;
use vadforge::gru::GruVadConfig;
use vadforge::stream::{BufferConfig, CascadeConfig};
use vadforge::{Error, Result};

/// Contents of a `--config` TOML file. Every section is optional; command
/// line flags override individual values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub synth: SynthConfig,
    pub features: MfbConfig,
    pub train: GruVadConfig,
    pub buffer: BufferConfig,
    pub cascade: CascadeConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
