use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use imh::dataset::{SynthKind, SynthParams};
use imh::pipeline::{Method, StageTiming, TrainConfig};
use imh::search::TruthMode;
use imh::studies::{bounds_study, gaussian_alpha, mean_map, sensitivity, table1, Experiment};
use imh::base::BaseMethod;
use imh::seed;
use serde::{Deserialize, Serialize};

use crate::config::{DataArgs, DatasetSpec, RunConfig};
use crate::manifest::Manifest;
use crate::{config_from_manifest, parse_serde};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// MAP of random versus k-means base sets over code lengths.
    Table1,
    /// MAP versus base size m and neighbour count k.
    Sensitivity,
    /// Concentration of the prototype estimator against its bound.
    Bounds,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    suite: Option<Suite>,
    /// TOML run config supplying the dataset and the training template.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Rerun the config recorded in a previous bench manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Queries held out from the dataset.
    #[arg(long)]
    test_count: Option<usize>,
    /// Use Euclidean ground truth with this relevant fraction instead of labels.
    #[arg(long)]
    euclidean_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_serde::<Method>)]
    methods: Option<Vec<Method>>,
    /// Code lengths for table1.
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Base sizes for sensitivity.
    #[arg(long, value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    /// Neighbour counts for sensitivity.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Code length for sensitivity.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    tsne_iters: Option<usize>,
    /// Sample sizes n' for bounds.
    #[arg(long, value_delimiter = ',')]
    n_primes: Option<Vec<usize>>,
    /// Bound value that fixes the deviation t for each n'.
    #[arg(long)]
    target_bound: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Row whose Gaussian weights define alpha in the bounds suite.
    #[arg(long)]
    alpha_row: Option<usize>,
    #[arg(long)]
    alpha_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub suite: Suite,
    pub dataset: DatasetSpec,
    pub test_count: usize,
    pub truth: TruthMode,
    pub template: TrainConfig,
    pub methods: Vec<Method>,
    pub bits: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ms: Vec<usize>,
    pub ks: Vec<usize>,
    pub n_primes: Vec<usize>,
    pub target_bound: f64,
    pub trials: usize,
    pub alpha_row: usize,
    pub alpha_sigma: f64,
    pub out: PathBuf,
}

/// Dataset used when none is given: well separated clusters for the
/// retrieval suites, three 2-D clusters for the bounds suite.
fn default_dataset(suite: Suite) -> DatasetSpec {
    let (n, synth_params) = match suite {
        Suite::Bounds => (600, SynthParams::default()),
        _ => (
            2000,
            SynthParams {
                clusters: 10,
                dims: 32,
                separation: 6.0,
                ..SynthParams::default()
            },
        ),
    };
    DatasetSpec {
        synth: Some(SynthKind::GaussianClusters),
        synth_n: n,
        synth_params,
        ..DatasetSpec::default()
    }
}

impl BenchArgs {
    fn resolve(&self) -> anyhow::Result<BenchConfig> {
        let mut c = match (&self.manifest, &self.config) {
            (Some(p), _) => config_from_manifest::<BenchConfig>(p, "bench")?,
            (None, cfg_path) => {
                let Some(suite) = self.suite else {
                    bail!("name a suite: table1, sensitivity or bounds");
                };
                let run = match cfg_path {
                    Some(p) => RunConfig::from_toml_file(p)?,
                    None => RunConfig::default(),
                };
                let dataset = if run.dataset.is_set() || self.data.path.is_some() || self.data.synth.is_some() {
                    run.dataset
                } else {
                    default_dataset(suite)
                };
                let methods = match suite {
                    Suite::Table1 => vec![Method::ImhLeBase, Method::ImhLe, Method::ImhTsne],
                    _ => vec![Method::ImhTsne, Method::ImhLe],
                };
                BenchConfig {
                    suite,
                    dataset,
                    test_count: run.split.map_or(200, |s| s.test_count),
                    truth: TruthMode::Labels,
                    template: TrainConfig { r: 64, ..run.train },
                    methods,
                    bits: vec![32, 64, 96],
                    seeds: vec![0],
                    ms: vec![100, 200, 400, 600, 800, 1000],
                    ks: (2..=10).collect(),
                    n_primes: vec![10, 50, 100],
                    target_bound: 0.25,
                    trials: 10_000,
                    alpha_row: 0,
                    alpha_sigma: 2.0,
                    out: run.out,
                }
            }
        };
        if let Some(s) = self.suite {
            if s != c.suite {
                bail!("the manifest records the {:?} suite", c.suite);
            }
        }
        self.data.apply(&mut c.dataset);
        if let Some(f) = self.euclidean_fraction {
            c.truth = TruthMode::EuclideanTopFraction { fraction: f };
        }
        macro_rules! set {
            ($($field:ident => $target:expr),*) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        set!(test_count => c.test_count, methods => c.methods, bits => c.bits, seeds => c.seeds,
             ms => c.ms, ks => c.ks, m => c.template.m, k => c.template.k, r => c.template.r,
             tsne_iters => c.template.tsne.iters, n_primes => c.n_primes, target_bound => c.target_bound,
             trials => c.trials, alpha_row => c.alpha_row, alpha_sigma => c.alpha_sigma,
             seed => c.template.seed, out => c.out);
        if c.seeds.is_empty() {
            bail!("--seeds must list at least one seed");
        }
        Ok(c)
    }
}

fn write_csv<T: Serialize>(manifest: &mut Manifest, path: PathBuf, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    manifest.write_output(&path, &w.into_inner()?)
}

#[derive(Debug, Serialize)]
struct Table1Summary {
    method: Method,
    bits: usize,
    random_map: f64,
    kmeans_map: f64,
}

pub fn run(args: BenchArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let cfg = args.resolve()?;
    let data = cfg.dataset.load().context("loading dataset")?;
    let mut manifest = Manifest::new("bench", &cfg, Some(cfg.template.seed))?;
    manifest.dataset(&data);
    let out = &cfg.out;

    match cfg.suite {
        Suite::Bounds => {
            let y = data.values();
            if cfg.alpha_row >= data.n() {
                bail!("alpha row {} is outside the dataset ({} rows)", cfg.alpha_row, data.n());
            }
            let alpha = gaussian_alpha(y, y.row(cfg.alpha_row), cfg.alpha_sigma)?;
            let reports = bounds_study(y, &alpha, &cfg.n_primes, cfg.target_bound, cfg.trials, cfg.template.seed)?;
            for r in &reports {
                log::info!(
                    "n'={}: t={:.4} bound={:.4} empirical={:.4} {}",
                    r.n_prime,
                    r.t,
                    r.bound,
                    r.empirical,
                    if r.pass { "ok" } else { "EXCEEDED" }
                );
            }
            write_csv(&mut manifest, out.join("bounds.csv"), &reports)?;
            let json = serde_json::to_string_pretty(&reports)? + "\n";
            manifest.write_output(&out.join("bounds.json"), json.as_bytes())?;
        }
        suite => {
            let exp = Experiment::from_split(
                &data,
                cfg.test_count,
                cfg.truth,
                seed::derive(cfg.template.seed, seed::SPLIT),
            )?;
            // every config in the grid is checked before the first run
            for &method in &cfg.methods {
                let mut probe = TrainConfig { method, ..cfg.template.clone() };
                let (n, d) = (exp.train.n(), exp.train.dims());
                match suite {
                    Suite::Table1 => {
                        for &r in &cfg.bits {
                            probe.r = r;
                            probe.validate(n, d)?;
                        }
                    }
                    _ => {
                        for &m in &cfg.ms {
                            TrainConfig { m, ..probe.clone() }.validate(n, d)?;
                        }
                        for &k in &cfg.ks {
                            TrainConfig { k, ..probe.clone() }.validate(n, d)?;
                        }
                    }
                }
            }
            if suite == Suite::Table1 {
                let rows = table1(&exp, &cfg.methods, &cfg.bits, &cfg.seeds, &cfg.template)?;
                let mut summary = Vec::new();
                for &method in &cfg.methods {
                    for &bits in &cfg.bits {
                        let avg = |b: BaseMethod| {
                            mean_map(rows.iter().filter(|r| r.method == method && r.bits == bits && r.base_method == b))
                        };
                        summary.push(Table1Summary {
                            method,
                            bits,
                            random_map: avg(BaseMethod::Random),
                            kmeans_map: avg(BaseMethod::Kmeans),
                        });
                    }
                }
                for s in &summary {
                    log::info!(
                        "{} {} bits: random {:.4}, kmeans {:.4}",
                        s.method,
                        s.bits,
                        s.random_map,
                        s.kmeans_map
                    );
                }
                write_csv(&mut manifest, out.join("table1.csv"), &rows)?;
                write_csv(&mut manifest, out.join("table1_summary.csv"), &summary)?;
            } else {
                let rows = sensitivity(&exp, &cfg.methods, &cfg.ms, &cfg.ks, &cfg.seeds, &cfg.template)?;
                write_csv(&mut manifest, out.join("sensitivity.csv"), &rows)?;
            }
        }
    }
    manifest.timings.push(StageTiming {
        stage: "bench".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    manifest.total_seconds = start.elapsed().as_secs_f64();
    manifest.save(&out.join("manifest.json"))?;
    log::info!("wrote {}", out.display());
    Ok(())
}
