use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use imh::model::Model;
use imh::search::{hamming_rank, HammingIndex};
use imh::{CodeSet, DataMatrix};
use serde::{Deserialize, Serialize};

use crate::config::{load_part, DataArgs, DatasetSpec, Part};
use crate::manifest::{sha256_hex, Manifest};
use crate::{config_from_manifest, sidecar_manifest};

/// A dataset, optionally restricted to one side of a saved split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Input {
    dataset: DatasetSpec,
    split: Option<PathBuf>,
    part: Option<Part>,
}

impl Input {
    fn from_args(base: Option<Input>, data: &DataArgs, split: &Option<PathBuf>, part: Option<Part>) -> Input {
        let mut inp = base.unwrap_or(Input {
            dataset: DatasetSpec::default(),
            split: None,
            part: None,
        });
        data.apply(&mut inp.dataset);
        if split.is_some() {
            inp.split = split.clone();
        }
        if let Some(p) = part {
            inp.part = Some(p);
        }
        inp
    }

    fn load(&self) -> anyhow::Result<DataMatrix> {
        load_part(&self.dataset, self.split.as_deref(), self.part).context("loading dataset")
    }
}

fn load_model(path: &PathBuf) -> anyhow::Result<(Model, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    let model = Model::from_bytes(path, &bytes)?;
    Ok((model, sha256_hex(&bytes)))
}

fn hash_with(model: &Model, data: &DataMatrix) -> anyhow::Result<CodeSet> {
    if data.n() > 0 && data.dims() != model.d() {
        bail!(
            "dimension mismatch: the model expects d = {}, the dataset has d = {}",
            model.d(),
            data.dims()
        );
    }
    Ok(model.hash(data)?)
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    /// Rerun the config recorded in a previous encode manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// split.json written by `train`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum)]
    part: Option<Part>,
    /// Output code file.
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodeConfig {
    model: PathBuf,
    model_sha256: String,
    input: Input,
    out: PathBuf,
}

pub fn run_encode(args: EncodeArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let base: Option<EncodeConfig> = args.manifest.as_deref().map(|p| config_from_manifest(p, "encode")).transpose()?;
    let model_path = args.model.clone().or(base.as_ref().map(|b| b.model.clone())).expect("clap requires --model");
    let (model, model_sha256) = load_model(&model_path)?;
    if let Some(b) = &base {
        if args.model.is_none() && b.model_sha256 != model_sha256 {
            bail!("{} changed since the recorded run", model_path.display());
        }
    }
    let cfg = EncodeConfig {
        model: model_path,
        model_sha256,
        input: Input::from_args(base.as_ref().map(|b| b.input.clone()), &args.data, &args.split, args.part),
        out: args.out.clone().or(base.map(|b| b.out)).expect("clap requires --out"),
    };
    let data = cfg.input.load()?;
    let t0 = Instant::now();
    let codes = hash_with(&model, &data)?;
    let encode_seconds = t0.elapsed().as_secs_f64();

    let mut manifest = Manifest::new("encode", &cfg, None)?;
    manifest.dataset(&data);
    manifest.write_output(&cfg.out, &codes.to_bytes())?;
    manifest.timings.push(imh::pipeline::StageTiming {
        stage: "encode".into(),
        seconds: encode_seconds,
    });
    manifest.total_seconds = start.elapsed().as_secs_f64();
    manifest.save(&sidecar_manifest(&cfg.out))?;
    log::info!("encoded {} points into {} bits: {}", codes.len(), codes.r(), cfg.out.display());
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    /// Database code file.
    #[arg(long)]
    db: PathBuf,
    /// Precomputed query codes.
    #[arg(long, conflicts_with = "model")]
    queries: Option<PathBuf>,
    /// Model used to hash the query dataset.
    #[arg(long, required_unless_present = "queries")]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum)]
    part: Option<Part>,
    /// Number of ranked results per query.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Return every item within this Hamming radius instead of a ranking.
    #[arg(long)]
    radius: Option<usize>,
    /// JSON-lines output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Hit {
    id: u64,
    distance: u32,
}

#[derive(Serialize)]
struct QueryLine {
    query_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    results: Option<Vec<Hit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<u64>>,
}

pub fn run_query(args: QueryArgs) -> anyhow::Result<()> {
    let db = CodeSet::load(&args.db)?;
    let queries = match (&args.queries, &args.model) {
        (Some(q), _) => CodeSet::load(q)?,
        (None, Some(m)) => {
            let (model, _) = load_model(m)?;
            let data = Input::from_args(None, &args.data, &args.split, args.part).load()?;
            hash_with(&model, &data)?
        }
        (None, None) => bail!("pass --queries or --model with a dataset"),
    };
    if queries.r() != db.r() {
        bail!("code length mismatch: database r = {}, queries r = {}", db.r(), queries.r());
    }
    let result = write_results(&args, &db, &queries);
    match result {
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => Ok(()),
        r => r,
    }
}

fn write_results(args: &QueryArgs, db: &CodeSet, queries: &CodeSet) -> anyhow::Result<()> {
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    };
    let index = HammingIndex::new(db);
    for (j, &qid) in queries.ids().iter().enumerate() {
        let code = queries.code(j);
        let line = match args.radius {
            Some(radius) => QueryLine {
                query_id: qid,
                results: None,
                ids: Some(index.lookup(code, radius)?),
            },
            None => QueryLine {
                query_id: qid,
                results: Some(
                    hamming_rank(db, code, Some(args.top_k))?
                        .into_iter()
                        .map(|r| Hit {
                            id: r.id,
                            distance: r.distance,
                        })
                        .collect(),
                ),
                ids: None,
            },
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
