//! Settings file (`avscan.toml`) and precedence: command-line flag, then file, then default.

use anyhow::{Context, Result};
use avscan_core::learn::DEFAULT_CUTOFF;
use avscan_core::matcher::DEFAULT_ETA;
use avscan_core::rdr::ScanMode;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_FILE: &str = "avscan.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub eta: Option<f64>,
    pub itv: Option<usize>,
    pub cutoff: Option<u32>,
    pub mode: Option<ScanMode>,
    pub disable_dm: Option<Vec<String>>,
    pub avs_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig> {
        Ok(toml::from_str(text)?)
    }

    /// Load `path` if given, else `avscan.toml` in the working directory if present.
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_FILE).is_file() => PathBuf::from(DEFAULT_FILE),
            None => return Ok(FileConfig::default()),
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        FileConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Settings after precedence resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub eta: f64,
    pub itv: Option<usize>,
    pub cutoff: u32,
    pub mode: ScanMode,
    pub disable_dm: Vec<String>,
    pub avs_dir: Option<PathBuf>,
    pub format: Format,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub itv: Option<usize>,
    pub cutoff: Option<u32>,
    pub mode: Option<ScanMode>,
    pub disable_dm: Option<Vec<String>>,
    pub avs_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn resolve(cli: Overrides, file: FileConfig) -> Settings {
    Settings {
        eta: cli.eta.or(file.eta).unwrap_or(DEFAULT_ETA),
        itv: cli.itv.or(file.itv),
        cutoff: cli.cutoff.or(file.cutoff).unwrap_or(DEFAULT_CUTOFF),
        mode: cli.mode.or(file.mode).unwrap_or_default(),
        disable_dm: cli.disable_dm.or(file.disable_dm).unwrap_or_default(),
        avs_dir: cli.avs_dir.or(file.avs_dir),
        format: cli.format.or(file.format).unwrap_or_default(),
    }
}
