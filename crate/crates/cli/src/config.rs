//! Optional TOML file layered over the built-in parameter presets.
//!
//! ```toml
//! seed = 7
//! tv_gamma = 1e-4
//! noise_free_stop = "floor"
//! current_amplitude = 0.1
//!
//! [inversion]
//! beta = 0.3
//! outer_max = 40
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use eit_core::experiment::{ExperimentSpec, NoiseFreeStop, NoiseScale};
use eit_core::inversion::InversionConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub noise_scale: Option<NoiseScale>,
    pub tv_gamma: Option<f64>,
    pub noise_free_stop: Option<NoiseFreeStop>,
    pub current_amplitude: Option<f64>,
    /// Keys of `InversionConfig`; unset keys keep the preset value.
    pub inversion: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(seed) = self.seed {
            spec.noise.seed = seed;
        }
        if let Some(scale) = self.noise_scale {
            spec.noise.scale = scale;
        }
        if self.tv_gamma.is_some() {
            spec.tv_gamma = self.tv_gamma;
        }
        if let Some(stop) = self.noise_free_stop {
            spec.noise_free_stop = stop;
        }
        if let Some(a) = self.current_amplitude {
            spec.mesh.current_amplitude = a;
        }
        if let Some(overrides) = &self.inversion {
            spec.config = overlay(&spec.config, overrides)?;
        }
        Ok(())
    }
}

fn overlay(base: &InversionConfig, overrides: &toml::Table) -> Result<InversionConfig> {
    let mut table = toml::Table::try_from(base)?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    Ok(table.try_into()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eit_core::experiment::{Method, PhantomId};

    #[test]
    fn overrides_only_named_keys() {
        let mut spec = ExperimentSpec::preset(Method::Alg2, PhantomId::B, 0.001);
        let before = spec.clone();
        let cfg = FileConfig::parse("seed = 9\nnoise_free_stop = \"floor\"\n[inversion]\nbeta = 0.3\nouter_max = 40\n").unwrap();
        cfg.apply(&mut spec).unwrap();
        assert_eq!(spec.noise.seed, 9);
        assert_eq!(spec.noise_free_stop, NoiseFreeStop::Floor);
        assert_eq!(spec.config.beta, 0.3);
        assert_eq!(spec.config.outer_max, 40);
        assert_eq!(spec.config.alpha0, before.config.alpha0);
        assert_eq!(spec.config.mu, before.config.mu);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse("sede = 1").is_err());
        let cfg = FileConfig::parse("[inversion]\nbeat = 0.3\n").unwrap();
        let mut spec = ExperimentSpec::preset(Method::Alg1, PhantomId::A, 0.0);
        assert!(cfg.apply(&mut spec).is_err());
    }
}
