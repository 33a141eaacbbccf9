//! JSON run configuration shared by the command line and the service.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "seed": 0,
//!   "k": 10,
//!   "profile": "cm40",
//!   "filter_bank": null,
//!   "pipeline": { "ridge": 0.01, "shrinkage": 0.001, "log_epsilon": null },
//!   "synth": { "classes": 12, "samples_per_class": 300, "noise_std": 0.25,
//!              "separation": 1.0, "jitter": null },
//!   "paths": { "out": null, "model": null, "manifest": null }
//! }
//! ```
//!
//! Every key is optional. A null `filter_bank` selects the default bank for
//! the profile's frame length rounded up to a power of two; a null `jitter`
//! selects the default derived from the averaging scale.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBankConfig;
use crate::pipeline::PipelineParams;
use crate::synthgen::{default_signatures, Jitter, RadarProfile, SynthConfig};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub classes: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub separation: f64,
    pub jitter: Option<Jitter>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: 12,
            samples_per_class: 300,
            noise_std: 0.25,
            separation: 1.0,
            jitter: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub seed: u64,
    pub k: usize,
    pub profile: String,
    pub filter_bank: Option<FilterBankConfig>,
    pub pipeline: PipelineParams,
    pub synth: SynthParams,
    pub paths: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA,
            seed: 0,
            k: 10,
            profile: "cm40".into(),
            filter_bank: None,
            pipeline: PipelineParams::default(),
            synth: SynthParams::default(),
            paths: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "config schema {} is not supported (expected {CONFIG_SCHEMA})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn radar_profile(&self) -> Result<RadarProfile> {
        RadarProfile::builtin(&self.profile)
    }

    pub fn filter_config(&self) -> Result<FilterBankConfig> {
        match &self.filter_bank {
            Some(cfg) => Ok(cfg.clone()),
            None => {
                let samples = self.radar_profile()?.samples;
                FilterBankConfig::default_for(samples.next_power_of_two().max(16))
            }
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let filter = self.filter_config()?;
        let signatures = default_signatures(self.synth.classes, self.seed, self.synth.separation)?;
        Ok(SynthConfig {
            profile: self.radar_profile()?,
            signatures,
            samples_per_class: self.synth.samples_per_class,
            noise_std: self.synth.noise_std,
            jitter: self
                .synth
                .jitter
                .unwrap_or_else(|| Jitter::for_averaging_scale(filter.averaging_scale)),
        })
    }

    /// Checks every component precondition without doing any work.
    pub fn validate(&self) -> Result<()> {
        let profile = self.radar_profile()?;
        let filter = self.filter_config()?;
        filter.validate()?;
        if profile.samples > filter.signal_len {
            return Err(Error::Config(format!(
                "profile {} has {} samples, more than the bank's {}",
                profile.name, profile.samples, filter.signal_len
            )));
        }
        self.pipeline.validate()?;
        self.synth_config()?.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k must be >= 2, got {}", self.k)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.filter_config().unwrap().signal_len, 8192);
    }

    #[test]
    fn unknown_keys_and_schema_are_rejected() {
        assert!(RunConfig::from_json(r#"{"sede": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 2}"#).is_err());
    }

    #[test]
    fn partial_sections() {
        let cfg = RunConfig::from_json(
            r#"{"profile": "cm40-1024", "synth": {"samples_per_class": 2}, "pipeline": {"ridge": 0.5, "shrinkage": 0.01}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.synth.classes, 12);
        assert_eq!(cfg.synth.samples_per_class, 2);
        assert_eq!(cfg.filter_config().unwrap().signal_len, 1024);
        let synth = cfg.synth_config().unwrap();
        assert_eq!(synth.jitter.max_delay, 32.0);
        assert_eq!(cfg.pipeline.ridge, 0.5);
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut cfg = RunConfig {
            k: 1,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.k = 10;
        cfg.synth.separation = 5.0;
        assert!(cfg.validate().is_err());
        cfg.synth.separation = 1.0;
        cfg.profile = "sonar".into();
        assert!(cfg.validate().is_err());
    }
}
