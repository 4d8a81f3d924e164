//! Per-run manifests: enough to re-execute a run and get the same data files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments that reproduce the run when passed back to the executable.
    pub args: Vec<String>,
    /// Every setting in effect, defaults included.
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, args: Vec<String>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            args,
            config: BTreeMap::new(),
            seed: None,
            version: VERSION.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        io::save_json(path, self)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        io::load_json(path)
    }
}

/// `<output>.manifest.json` next to a file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
