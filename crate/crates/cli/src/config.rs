use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crossplat_core::experiments::DEFAULT_SPLIT_RATIO;
use crossplat_core::features::FeatureConfig;
use crossplat_core::model::Hyperparams;
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "CROSSPLAT_CONFIG";

/// Run configuration. Every field is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Directory holding `<ID>.ds` canonical dataset files.
    pub data_dir: Option<PathBuf>,
    pub features: FeatureConfig,
    pub split_ratio: f64,
    pub seed: u64,
    pub model: Hyperparams,
    /// Minimum survey response time in seconds.
    pub min_response_seconds: f64,
    /// Lexicon file per language code.
    pub lexicons: BTreeMap<String, PathBuf>,
    /// Language profile file per language code; replaces the built-in profile.
    pub language_profiles: BTreeMap<String, PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            features: FeatureConfig::default(),
            split_ratio: DEFAULT_SPLIT_RATIO,
            seed: 0,
            model: Hyperparams::default(),
            min_response_seconds: 0.0,
            lexicons: BTreeMap::new(),
            language_profiles: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.features.validate()?;
        config.model.validate()?;
        Ok(config)
    }

    /// Reads `explicit`, else the file named by the environment variable,
    /// else the defaults. Relative paths inside the file resolve against
    /// the file's directory.
    pub fn resolve(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>)> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let Some(path) = path else {
            return Ok((Config::default(), None));
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = config.data_dir.as_mut() {
            rebase(d);
        }
        config.lexicons.values_mut().for_each(rebase);
        config.language_profiles.values_mut().for_each(rebase);
        Ok((config, Some(path)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::parse("seed = 9\n[features]\ndimension = 1024\n[model]\nepochs = 3\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.features.dimension, 1024);
        assert_eq!(c.features.hash_seed, FeatureConfig::default().hash_seed);
        assert_eq!(c.model.epochs, 3);
        assert_eq!(c.split_ratio, 0.7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::parse("sed = 9\n").is_err());
        assert!(Config::parse("[features]\ndim = 2\n").is_err());
        assert!(Config::parse("[features]\ndimension = 1000\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }
}
