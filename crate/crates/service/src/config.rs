//! `photoscout.toml`: where albums live, where session logs go, how to bind
//! and where candidate programs come from.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use photoscout::annotations::SpatialConfig;
use photoscout::nlbridge::{LlmConfig, SketchSource, SourceMode, DEFAULT_SAMPLE_COUNT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "PHOTOSCOUT_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Fallback,
    Replay,
    Llm,
}

/// Flat form of [`SketchSource`] for the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub mode: SourceKind,
    /// Required when `mode = "replay"`.
    pub replay_file: Option<PathBuf>,
    pub samples: usize,
    pub fallback_on_error: bool,
    pub llm: LlmConfig,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mode: SourceKind::Fallback,
            replay_file: None,
            samples: DEFAULT_SAMPLE_COUNT,
            fallback_on_error: true,
            llm: LlmConfig::default(),
        }
    }
}

impl SourceConfig {
    pub fn to_source(&self) -> Result<SketchSource, String> {
        let mode = match self.mode {
            SourceKind::Fallback => SourceMode::Fallback,
            SourceKind::Llm => SourceMode::Llm(self.llm.clone()),
            SourceKind::Replay => SourceMode::Replay {
                path: self
                    .replay_file
                    .clone()
                    .ok_or("sketch_source.replay_file is required in replay mode")?,
            },
        };
        if self.samples == 0 {
            return Err("sketch_source.samples must be at least 1".into());
        }
        Ok(SketchSource {
            mode,
            sample_count: self.samples,
            fallback_on_error: self.fallback_on_error,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Each subdirectory is one album, named after the directory.
    pub album_root: PathBuf,
    /// Session event logs go to `<state_dir>/sessions/<id>.jsonl`. Without
    /// it the log is kept in memory only.
    pub state_dir: Option<PathBuf>,
    pub confidence_threshold: f64,
    pub spatial: SpatialConfig,
    pub sketch_source: SourceConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            album_root: PathBuf::from("albums"),
            state_dir: None,
            confidence_threshold: 0.5,
            spatial: SpatialConfig::default(),
            sketch_source: SourceConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let invalid = |detail: String| ConfigError::Invalid {
            path: origin.to_owned(),
            detail,
        };
        let mut config: ServiceConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&config.confidence_threshold) {
            return Err(invalid(format!(
                "confidence_threshold {} outside [0, 1]",
                config.confidence_threshold
            )));
        }
        config.sketch_source.to_source().map_err(invalid)?;
        // relative paths are relative to the file that names them
        let base = origin.parent().unwrap_or(Path::new(""));
        config.album_root = base.join(&config.album_root);
        config.state_dir = config.state_dir.map(|d| base.join(d));
        config.sketch_source.replay_file = config.sketch_source.replay_file.map(|f| base.join(f));
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// The file named by `PHOTOSCOUT_CONFIG`, else `./photoscout.toml` if
    /// present, else defaults.
    pub fn discover() -> Result<Self, ConfigError> {
        if let Ok(path) = std::env::var(CONFIG_ENV) {
            return Self::load(Path::new(&path));
        }
        let local = Path::new("photoscout.toml");
        if local.is_file() {
            return Self::load(local);
        }
        Ok(Self::default())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn source(&self) -> SketchSource {
        self.sketch_source.to_source().expect("validated when loaded")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_bind_to_localhost() {
        let c = ServiceConfig::from_toml("", Path::new("photoscout.toml")).unwrap();
        assert_eq!(c.addr().to_string(), "127.0.0.1:8080");
        assert_eq!(c.source(), SketchSource::fallback());
    }

    #[test]
    fn paths_are_relative_to_the_file() {
        let text = r#"
            port = 9000
            album_root = "albums"
            state_dir = "state"
            confidence_threshold = 0.7

            [spatial]
            nextto_max_gap = 0.2

            [sketch_source]
            mode = "replay"
            replay_file = "llm/wedding.txt"
        "#;
        let c = ServiceConfig::from_toml(text, Path::new("/srv/ps/photoscout.toml")).unwrap();
        assert_eq!(c.album_root, Path::new("/srv/ps/albums"));
        assert_eq!(c.state_dir.as_deref(), Some(Path::new("/srv/ps/state")));
        assert_eq!(c.spatial.nextto_max_gap, 0.2);
        assert_eq!(c.spatial.inside_fraction, 0.9);
        assert_eq!(c.source(), SketchSource::replay("/srv/ps/llm/wedding.txt"));
    }

    #[test]
    fn rejects_bad_values() {
        let p = Path::new("c.toml");
        assert!(ServiceConfig::from_toml("confidence_threshold = 1.5", p).is_err());
        assert!(ServiceConfig::from_toml("[sketch_source]\nmode = \"replay\"", p).is_err());
        assert!(ServiceConfig::from_toml("[sketch_source]\nsamples = 0", p).is_err());
        assert!(ServiceConfig::from_toml("prot = 1", p).is_err());
    }
}
