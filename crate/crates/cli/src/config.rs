//! Experiment configuration files and the shipped presets.

use std::fs;
use std::path::{Path, PathBuf};

use mmtl_core::decoder::BeamConfig;
use mmtl_core::model::ModelConfig;
use mmtl_core::trainer::TrainConfig;
use mmtl_core::Error;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const PRESETS: [(&str, &str); 3] = [
    ("ende", include_str!("../configs/ende.json")),
    ("enfr", include_str!("../configs/enfr.json")),
    ("synthetic", include_str!("../configs/synthetic.json")),
];

/// Corpus locations. `train` and `valid` are split prefixes: `p.src`,
/// `p.trg`, `p.global.mmtf` and `p.spatial.mmtf`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub src_vocab: Option<PathBuf>,
    pub trg_vocab: Option<PathBuf>,
}

impl DataConfig {
    /// Split prefixes inside a directory written by `synth`.
    pub fn from_dir(dir: &Path) -> Self {
        DataConfig { train: Some(dir.join("train")), valid: Some(dir.join("valid")), src_vocab: None, trg_vocab: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub decode: BeamConfig,
    #[serde(default)]
    pub data: DataConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        if cfg.model.src_vocab != 0 || cfg.model.trg_vocab != 0 {
            cfg.model.validate()?;
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            CliError::Usage(format!("unknown preset {name:?} (available: {})", names.join(", ")))
        })?;
        Self::from_json(text, &format!("preset {name}"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// `--config` wins over `--preset`; neither means `default`.
    pub fn resolve(config: Option<&Path>, preset: Option<&str>, default: &str) -> Result<Self, CliError> {
        match (config, preset) {
            (Some(_), Some(_)) => Err(CliError::Usage("--config and --preset are mutually exclusive".into())),
            (Some(p), None) => Self::load(p),
            (None, p) => Self::preset(p.unwrap_or(default)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmtl_core::model::{count_params, Dropout, Variant};

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, _) in PRESETS {
            let c = ExperimentConfig::preset(name).unwrap();
            let back = ExperimentConfig::from_json(&c.to_json(), "round trip").unwrap();
            assert_eq!(c, back);
        }
        let ende = ExperimentConfig::preset("ende").unwrap();
        assert_eq!(ende.model.dropout, Dropout::ENDE);
        assert_eq!(ende.model, ModelConfig::full_scale(Variant::Baseline, 5234, 7052));
        assert_eq!(ende.train, TrainConfig::default());
        assert_eq!(count_params(&ende.model), 4_579_585);
        assert_eq!(ExperimentConfig::preset("enfr").unwrap().model.dropout, Dropout::ENFR);
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"model": {"variant": "baseline", "src_vocab": 9, "trg_vocab": 9}, "extra": 1}"#;
        assert!(ExperimentConfig::from_json(text, "t").is_err());
        let text = r#"{"model": {"variant": "baseline", "src_vocab": 9, "trg_vocab": 9}}"#;
        let c = ExperimentConfig::from_json(text, "t").unwrap();
        assert_eq!(c.decode, BeamConfig::default());
        let c = ExperimentConfig::from_json(r#"{"model": {"variant": "dec-init"}}"#, "t").unwrap();
        assert_eq!((c.model.src_vocab, c.model.trg_vocab), (0, 0));
        assert!(ExperimentConfig::from_json(r#"{"model": {"variant": "dec-init", "src_vocab": 2}}"#, "t").is_err());
    }
}
