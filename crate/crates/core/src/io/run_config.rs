use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{DictionaryConfig, KingGrid};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::experiments::{BootstrapConfig, ScenarioConfig};
use crate::qut::QutConfig;
use crate::solver::FitOptions;

/// Everything a command needs, one TOML table per section. Every key is
/// optional; missing keys keep their defaults and unknown keys are errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub dictionary: DictionaryConfig,
    pub solver: FitOptions,
    pub qut: QutConfig,
    pub scenario: ScenarioConfig,
    pub bootstrap: BootstrapConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = super::image_file::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; errors read `origin:line: message`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            Error::Config(format!("{origin}:{line}: {}", e.message().trim()))
        })?;
        if let Err((section, e)) = cfg.check() {
            let line = locate(text, section, &e.to_string());
            let at = line.map(|l| format!("{origin}:{l}")).unwrap_or_else(|| origin.to_string());
            return Err(Error::Config(format!("{at}: [{section}] {e}")));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(section, e)| Error::Config(format!("[{section}] {e}")))
    }

    fn check(&self) -> std::result::Result<(), (&'static str, Error)> {
        self.model.validate().map_err(|e| ("model", e))?;
        if let Some(k) = &self.dictionary.king {
            KingGrid::new(k.rho.clone(), k.beta.clone()).map_err(|e| ("dictionary", e))?;
        }
        self.dictionary.wavelet.lowpass().map_err(|e| ("dictionary", e))?;
        self.solver.validate().map_err(|e| ("solver", e))?;
        self.scenario.validate().map_err(|e| ("scenario", e))?;
        self.qut.validate(self.scenario.n).map_err(|e| ("qut", e))?;
        self.bootstrap.validate().map_err(|e| ("bootstrap", e))?;
        Ok(())
    }

    /// One seed for every random stream of a run.
    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.qut.seed = seed;
        self.bootstrap.seed = seed;
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the key named in `message` inside `[section]`, else of the
/// section header.
fn locate(text: &str, section: &str, message: &str) -> Option<usize> {
    let mut header = None;
    let mut inside = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            inside = name == section || name.starts_with(&format!("{section}."));
            if name == section {
                header = Some(i + 1);
            }
            continue;
        }
        if !inside {
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            let hit = message
                .split(|c: char| !(c.is_alphanumeric() || c == '_'))
                .any(|w| w == key);
            if hit {
                return Some(i + 1);
            }
        }
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(RunConfig::parse("", "t").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text, "t").unwrap(), cfg);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "[model]\nbackground = 0.001\n\n[solver]\nmax_iter = 5\n";
        let msg = RunConfig::parse(text, "run.toml").unwrap_err().to_string();
        assert!(msg.contains("run.toml:5:"), "{msg}");
        assert!(msg.contains("max_iter"), "{msg}");
    }

    #[test]
    fn invalid_value_reports_line() {
        let text = "[scenario]\nn = 64\nexposure = -1.0\n";
        let msg = RunConfig::parse(text, "run.toml").unwrap_err().to_string();
        assert!(msg.contains("run.toml:3:"), "{msg}");
    }

    #[test]
    fn type_error_reports_line() {
        let text = "[qut]\n\nm0 = \"many\"\n";
        let msg = RunConfig::parse(text, "c").unwrap_err().to_string();
        assert!(msg.contains("c:3:"), "{msg}");
    }

    #[test]
    fn nested_sections_parse() {
        let text = r#"
[model]
sector_mode = "symmetric"
center = [31.5, 32.0]

[model.sensitivity]
kind = "dead_columns"
columns = [3, 4]

[dictionary.wavelet]
vanishing_moments = 2

[scenario]
n = 32
profile = "cosmo1"
"#;
        let cfg = RunConfig::parse(text, "c").unwrap();
        assert_eq!(cfg.scenario.n, 32);
        assert_eq!(cfg.dictionary.wavelet.vanishing_moments, 2);
        assert_eq!(cfg.model.center, Some([31.5, 32.0]));
    }

    #[test]
    fn seed_reaches_every_stream() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(9);
        assert_eq!((cfg.scenario.seed, cfg.qut.seed, cfg.bootstrap.seed), (9, 9, 9));
    }
}
