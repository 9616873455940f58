//! Run configuration file. Every key mirrors the long flag of the same name
//! (with `-` written as `_`); flags given on the command line win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crossel_core::Technique;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cloud: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub mesh: Option<PathBuf>,

    pub technique: Option<Technique>,
    pub radius: Option<f64>,
    pub eps: Option<f64>,

    pub grid: Option<usize>,
    pub padding: Option<f64>,
    pub alpha: Option<f64>,
    pub pilot_bandwidth: Option<f64>,

    pub seed: Option<u64>,
    pub kind: Option<String>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub scale: Option<f64>,
    pub separation: Option<f64>,
    pub thickness: Option<f64>,
    pub noise: Option<usize>,
    pub fill: Option<f64>,
    pub top: Option<f64>,
    pub trace_kind: Option<String>,
    pub target: Option<u32>,
    pub trace_seed: Option<u64>,
    pub label: Option<u32>,

    pub host: Option<String>,
    pub port: Option<u16>,
    pub ttl_secs: Option<u64>,
    pub cache_entries: Option<usize>,
    pub ui_origin: Option<String>,
}

impl RunConfig {
    /// Reads a configuration file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.cloud,
            &mut cfg.field,
            &mut cfg.trace,
            &mut cfg.scene,
            &mut cfg.labels,
            &mut cfg.selection,
            &mut cfg.output,
            &mut cfg.mesh,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// The flag if given, else the configured value.
pub fn pick<T: Clone>(flag: &Option<T>, configured: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| configured.clone())
}

/// Like [`pick`], but the value must come from somewhere.
pub fn require<T: Clone>(flag: &Option<T>, configured: &Option<T>, name: &str) -> CliResult<T> {
    pick(flag, configured).ok_or_else(|| CliError::usage(format!("missing --{name}")))
}
