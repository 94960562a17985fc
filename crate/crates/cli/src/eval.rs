use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use imh::pipeline::StageTiming;
use imh::search::{build_ground_truth, evaluate, EvalOptions, TruthMode};
use imh::CodeSet;
use serde::{Deserialize, Serialize};

use crate::config::{read_split, DataArgs, DatasetSpec};
use crate::manifest::Manifest;
use crate::config_from_manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TruthKind {
    Labels,
    Euclidean,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Rerun the config recorded in a previous eval manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Database codes; repeat together with --queries to sweep code lengths.
    #[arg(long)]
    db: Vec<PathBuf>,
    /// Query codes, paired with the --db at the same position.
    #[arg(long)]
    queries: Vec<PathBuf>,
    /// Relevance: shared labels, or the nearest fraction in Euclidean distance.
    #[arg(long, value_enum)]
    truth: Option<TruthKind>,
    /// Fraction of the database counted as relevant for euclidean truth.
    #[arg(long)]
    fraction: Option<f64>,
    /// Dataset the codes were computed from.
    #[command(flatten)]
    data: DataArgs,
    /// split.json separating database (train) and query (test) rows.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Hamming radius of the lookup protocol.
    #[arg(long)]
    radius: Option<usize>,
    /// Truncate average precision at this rank.
    #[arg(long)]
    ap_cutoff: Option<usize>,
    /// Comma-separated result counts for the precision@N curve.
    #[arg(long, value_delimiter = ',')]
    precision_at: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CodePair {
    db: PathBuf,
    queries: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvalConfig {
    pairs: Vec<CodePair>,
    truth: TruthMode,
    dataset: DatasetSpec,
    split: Option<PathBuf>,
    options: EvalOptions,
    out: PathBuf,
}

impl EvalArgs {
    fn resolve(&self) -> anyhow::Result<EvalConfig> {
        let base: Option<EvalConfig> = self.manifest.as_deref().map(|p| config_from_manifest(p, "eval")).transpose()?;
        if self.db.len() != self.queries.len() {
            bail!("--db and --queries must be given the same number of times");
        }
        let mut c = base.unwrap_or(EvalConfig {
            pairs: Vec::new(),
            truth: TruthMode::Labels,
            dataset: DatasetSpec::default(),
            split: None,
            options: EvalOptions::default(),
            out: PathBuf::from("imh-eval"),
        });
        if !self.db.is_empty() {
            c.pairs = self
                .db
                .iter()
                .zip(&self.queries)
                .map(|(d, q)| CodePair {
                    db: d.clone(),
                    queries: q.clone(),
                })
                .collect();
        }
        let fraction = match (self.fraction, c.truth) {
            (Some(f), _) => f,
            (None, TruthMode::EuclideanTopFraction { fraction }) => fraction,
            (None, TruthMode::Labels) => 0.02,
        };
        match self.truth {
            Some(TruthKind::Labels) => c.truth = TruthMode::Labels,
            Some(TruthKind::Euclidean) => c.truth = TruthMode::EuclideanTopFraction { fraction },
            None if self.fraction.is_some() => c.truth = TruthMode::EuclideanTopFraction { fraction },
            None => {}
        }
        self.data.apply(&mut c.dataset);
        if self.split.is_some() {
            c.split = self.split.clone();
        }
        if let Some(r) = self.radius {
            c.options.radius = r;
        }
        if self.ap_cutoff.is_some() {
            c.options.ap_cutoff = self.ap_cutoff;
        }
        if let Some(p) = &self.precision_at {
            c.options.precision_at = p.clone();
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if c.pairs.is_empty() {
            bail!("no codes to evaluate; pass --db and --queries");
        }
        Ok(c)
    }
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    index: usize,
    r: usize,
    db: &'a str,
    queries: &'a str,
    scored_queries: usize,
    map: f64,
    precision_at_radius: f64,
    recall_at_radius: f64,
    f1_at_radius: f64,
    lookup_fail_rate: f64,
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let cfg = args.resolve()?;
    if !cfg.dataset.is_set() {
        bail!("ground truth needs the dataset the codes came from; pass --data or --synth");
    }
    let Some(split_path) = &cfg.split else {
        bail!("ground truth needs the split separating database and queries; pass --split");
    };
    let data = cfg.dataset.load().context("loading dataset")?;
    let (train, test) = read_split(split_path)?.apply(&data)?;
    let truth = build_ground_truth(&train, &test, cfg.truth)?;

    let mut manifest = Manifest::new("eval", &cfg, None)?;
    manifest.dataset(&data);
    let mut summary = csv::Writer::from_writer(Vec::new());
    for (i, pair) in cfg.pairs.iter().enumerate() {
        let db = CodeSet::load(&pair.db)?;
        let queries = CodeSet::load(&pair.queries)?;
        if db.r() != queries.r() {
            bail!(
                "code length mismatch: {} has r = {}, {} has r = {}",
                pair.db.display(),
                db.r(),
                pair.queries.display(),
                queries.r()
            );
        }
        let report = evaluate(&db, &queries, &truth, &cfg.options)
            .with_context(|| format!("evaluating {} against {}", pair.queries.display(), pair.db.display()))?;
        log::info!(
            "r={}: MAP {:.4}, F1@{} {:.4}, lookup fail rate {:.3}",
            report.r,
            report.map,
            report.radius,
            report.f1_at_radius,
            report.lookup_fail_rate
        );
        // timings go to the manifest so the report files are reproducible
        manifest.timings.push(StageTiming {
            stage: format!("query_{i}"),
            seconds: report.query_seconds.iter().sum(),
        });
        let mut value = serde_json::to_value(&report)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("query_seconds");
            obj.remove("mean_query_seconds");
        }
        let json = serde_json::to_string_pretty(&value)? + "\n";
        manifest.write_output(&cfg.out.join(format!("report_{i}_r{}.json", report.r)), json.as_bytes())?;
        manifest.write_output(&cfg.out.join(format!("curves_{i}_r{}.csv", report.r)), report.curves_csv()?.as_bytes())?;
        summary.serialize(SummaryRow {
            index: i,
            r: report.r,
            db: &pair.db.to_string_lossy(),
            queries: &pair.queries.to_string_lossy(),
            scored_queries: report.scored_queries,
            map: report.map,
            precision_at_radius: report.precision_at_radius,
            recall_at_radius: report.recall_at_radius,
            f1_at_radius: report.f1_at_radius,
            lookup_fail_rate: report.lookup_fail_rate,
        })?;
    }
    manifest.write_output(&cfg.out.join("summary.csv"), &summary.into_inner()?)?;
    manifest.total_seconds = start.elapsed().as_secs_f64();
    manifest.save(&cfg.out.join("manifest.json"))?;
    Ok(())
}
