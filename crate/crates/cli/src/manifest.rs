use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use imh::pipeline::StageTiming;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub provenance: String,
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration (file values with flag overrides applied).
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub datasets: Vec<DatasetInfo>,
    pub outputs: Vec<Output>,
    pub timings: Vec<StageTiming>,
    pub total_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(config: &serde_json::Value) -> String {
    sha256_hex(config.to_string().as_bytes())
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            tool: "imh".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(&config),
            config,
            seed,
            threads: rayon::current_num_threads(),
            datasets: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            total_seconds: 0.0,
        })
    }

    pub fn dataset(&mut self, data: &imh::DataMatrix) {
        self.datasets.push(DatasetInfo {
            provenance: data.provenance().to_string(),
            n: data.n(),
            d: data.dims(),
        });
    }

    /// Writes `bytes` to `path` and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(Output {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    /// Reads a manifest and checks that its config still hashes to the
    /// recorded value.
    pub fn load_verified(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        let actual = config_hash(&m.config);
        if actual != m.config_hash {
            bail!(
                "{}: config hash mismatch (recorded {}, computed {actual}); the config was edited",
                path.display(),
                m.config_hash
            );
        }
        Ok(m)
    }
}
