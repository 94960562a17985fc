use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use imh::dataset::{
    load_csv, load_idx, load_idx_with_labels, load_native, load_vecs, split, synth_manifold, Normalization, SplitSpec,
    SynthKind, SynthParams, VecsKind,
};
use imh::pipeline::TrainConfig;
use imh::{seed, DataMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Idx,
    Fvecs,
    Bvecs,
    Csv,
    Native,
}

/// Where a dataset comes from and how it is prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: Option<PathBuf>,
    /// Inferred from the file name when absent.
    pub format: Option<Format>,
    /// IDX label file matching `path`.
    pub labels: Option<PathBuf>,
    /// CSV: the last column holds integer labels.
    pub csv_labels: bool,
    /// Generate a synthetic dataset instead of reading `path`.
    pub synth: Option<SynthKind>,
    pub synth_n: usize,
    pub synth_seed: u64,
    pub synth_params: SynthParams,
    /// Keep only the first `limit` rows.
    pub limit: Option<usize>,
    pub normalize: Normalization,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            path: None,
            format: None,
            labels: None,
            csv_labels: false,
            synth: None,
            synth_n: 2000,
            synth_seed: 0,
            synth_params: SynthParams::default(),
            limit: None,
            normalize: Normalization::None,
        }
    }
}

fn infer_format(path: &Path) -> anyhow::Result<Format> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or_default();
    Ok(match ext {
        "fvecs" => Format::Fvecs,
        "bvecs" => Format::Bvecs,
        "csv" => Format::Csv,
        "imhdata" => Format::Native,
        _ if name.contains("idx") || name.ends_with("-ubyte") => Format::Idx,
        _ => bail!("cannot infer the format of {}; pass --format", path.display()),
    })
}

impl DatasetSpec {
    pub fn is_set(&self) -> bool {
        self.path.is_some() || self.synth.is_some()
    }

    pub fn load(&self) -> anyhow::Result<DataMatrix> {
        let data = match (&self.path, self.synth) {
            (Some(_), Some(_)) => bail!("dataset has both a path and a synthetic kind"),
            (None, Some(kind)) => synth_manifold(kind, self.synth_n, &self.synth_params, self.synth_seed)?,
            (None, None) => bail!("no dataset given; pass --data or --synth"),
            (Some(path), None) => {
                let format = match self.format {
                    Some(f) => f,
                    None => infer_format(path)?,
                };
                let loaded = match format {
                    Format::Idx => match &self.labels {
                        Some(l) => load_idx_with_labels(path, l)?,
                        None => load_idx(path)?,
                    },
                    Format::Fvecs => load_vecs(path, VecsKind::Fvecs)?,
                    Format::Bvecs => load_vecs(path, VecsKind::Bvecs)?,
                    Format::Csv => load_csv(path, self.csv_labels)?,
                    Format::Native => load_native(path)?,
                };
                if self.labels.is_some() && format != Format::Idx {
                    bail!("a separate label file is only supported for IDX data");
                }
                loaded
            }
        };
        let data = match self.limit {
            Some(n) => data.head(n),
            None => data,
        };
        Ok(data.normalized(self.normalize))
    }
}

/// Dataset flags shared by every command that reads data.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Dataset file (IDX, fvecs, bvecs, CSV or native container).
    #[arg(long = "data")]
    pub path: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// IDX label file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// The last CSV column holds labels.
    #[arg(long)]
    pub csv_labels: bool,
    /// Synthetic dataset kind (swiss_roll, gaussian_clusters).
    #[arg(long)]
    pub synth: Option<SynthKind>,
    /// Number of synthetic points.
    #[arg(long)]
    pub synth_n: Option<usize>,
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Keep only the first N rows.
    #[arg(long)]
    pub limit: Option<usize>,
    /// none, unit_l2 or zscore.
    #[arg(long)]
    pub normalize: Option<Normalization>,
}

impl DataArgs {
    pub fn apply(&self, spec: &mut DatasetSpec) {
        if let Some(p) = &self.path {
            spec.path = Some(p.clone());
            spec.synth = None;
        }
        if let Some(k) = self.synth {
            spec.synth = Some(k);
            spec.path = None;
        }
        if self.format.is_some() {
            spec.format = self.format;
        }
        if let Some(l) = &self.labels {
            spec.labels = Some(l.clone());
        }
        spec.csv_labels |= self.csv_labels;
        if let Some(n) = self.synth_n {
            spec.synth_n = n;
        }
        if let Some(s) = self.synth_seed {
            spec.synth_seed = s;
        }
        if self.limit.is_some() {
            spec.limit = self.limit;
        }
        if let Some(n) = self.normalize {
            spec.normalize = n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub test_count: usize,
    /// Defaults to a seed derived from the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Everything `train` needs; the TOML config file has this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub split: Option<SplitConfig>,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            split: None,
            train: TrainConfig::default(),
            out: PathBuf::from("imh-out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Training rows and the split, when one is configured.
    pub fn training_data(&self, data: &DataMatrix) -> anyhow::Result<(DataMatrix, Option<SplitSpec>)> {
        match &self.split {
            None => Ok((data.clone(), None)),
            Some(s) => {
                let seed_value = s.seed.unwrap_or_else(|| seed::derive(self.train.seed, seed::SPLIT));
                let spec = split(data, s.test_count, seed_value)?;
                let (train, _) = spec.apply(data)?;
                Ok((train, Some(spec)))
            }
        }
    }
}

/// Reads a split written by `train`.
pub fn read_split(path: &Path) -> anyhow::Result<SplitSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading split {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing split {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Test,
}

/// Loads a dataset and optionally restricts it to one side of a split.
pub fn load_part(spec: &DatasetSpec, split_file: Option<&Path>, part: Option<Part>) -> anyhow::Result<DataMatrix> {
    let data = spec.load()?;
    match (split_file, part) {
        (None, None) => Ok(data),
        (Some(f), Some(p)) => {
            let (train, test) = read_split(f)?.apply(&data)?;
            Ok(if p == Part::Train { train } else { test })
        }
        (Some(_), None) => bail!("--split needs --part train|test"),
        (None, Some(_)) => bail!("--part needs --split"),
    }
}
