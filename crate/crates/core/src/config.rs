//! One TOML file configuring the whole pipeline. Every section is optional
//! and falls back to its default, so an empty file is a valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::SurfaceConfig;
use crate::graph::GraphConfig;
use crate::line::DetectorConfig;
use crate::model::ModelConfig;
use crate::pipeline::PipelineConfig;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub surface: SurfaceConfig,
    pub detector: DetectorConfig,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub pipeline: PipelineConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        self.detector.validate()?;
        self.graph.validate()?;
        self.model.validate()?;
        self.training.validate()?;
        self.pipeline.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("toml: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}
