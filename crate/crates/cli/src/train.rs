use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use imh::base::BaseMethod;
use imh::embed::CrossTerm;
use imh::pipeline::{train, Method, SigmaMode, StageTiming};

use crate::config::{DataArgs, RunConfig, SplitConfig};
use crate::manifest::Manifest;
use crate::{config_from_manifest, parse_serde, write_text};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// TOML run config; flags override its values.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Rerun the config recorded in a previous train manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Hold out this many rows as queries (written to split.json).
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long, requires = "test_count")]
    pub split_seed: Option<u64>,
    /// imh-tsne, imh-le, imh-le-base, imh-pca, lsh or pcah.
    #[arg(long, value_parser = parse_serde::<Method>)]
    pub method: Option<Method>,
    /// Base set size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Nearest base points per extension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Code length in bits.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_serde::<CrossTerm>)]
    pub cross_term: Option<CrossTerm>,
    /// Fixed Gaussian bandwidth instead of the mean k-NN distance.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// kmeans or random.
    #[arg(long, value_parser = parse_serde::<BaseMethod>)]
    pub base_method: Option<BaseMethod>,
    #[arg(long)]
    pub kmeans_iters: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub tsne_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl TrainArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match (&self.manifest, &self.config) {
            (Some(m), _) => config_from_manifest(m, "train")?,
            (None, Some(p)) => RunConfig::from_toml_file(p)?,
            (None, None) => RunConfig::default(),
        };
        self.data.apply(&mut c.dataset);
        if let Some(t) = self.test_count {
            c.split = Some(SplitConfig {
                test_count: t,
                seed: self.split_seed,
            });
        }
        let t = &mut c.train;
        macro_rules! set {
            ($($field:ident => $target:expr),*) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(method => t.method, m => t.m, k => t.k, r => t.r, lambda => t.lambda,
             cross_term => t.cross_term, base_method => t.base_method,
             kmeans_iters => t.kmeans_iters, tsne_iters => t.tsne.iters, seed => t.seed);
        if let Some(s) = self.sigma {
            t.sigma = SigmaMode::Fixed { sigma: s };
        }
        if self.perplexity.is_some() {
            t.tsne.perplexity = self.perplexity;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        Ok(c)
    }
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let cfg = args.resolve()?;
    // shape-free checks first so a bad config fails before any data is read
    cfg.train.validate(usize::MAX, usize::MAX)?;
    let data = cfg.dataset.load().context("loading dataset")?;
    let (train_data, split) = cfg.training_data(&data)?;
    cfg.train.validate(train_data.n(), train_data.dims())?;
    let mut timings = vec![StageTiming {
        stage: "load".into(),
        seconds: start.elapsed().as_secs_f64(),
    }];
    log::info!(
        "training {} on {} points of dimension {} (m={}, k={}, r={})",
        cfg.train.method,
        train_data.n(),
        train_data.dims(),
        cfg.train.m,
        cfg.train.k,
        cfg.train.r
    );

    let trained = train(train_data.values(), &cfg.train)?;
    timings.extend(trained.timings);

    let mut manifest = Manifest::new("train", &cfg, Some(cfg.train.seed))?;
    manifest.dataset(&data);
    manifest.write_output(&cfg.out.join("model.bin"), &trained.model.to_bytes())?;
    if let Some(s) = &split {
        let text = serde_json::to_string_pretty(s)? + "\n";
        manifest.write_output(&cfg.out.join("split.json"), text.as_bytes())?;
    }
    manifest.timings = timings;
    manifest.total_seconds = start.elapsed().as_secs_f64();
    manifest.save(&cfg.out.join("manifest.json"))?;
    write_text(&cfg.out.join("config.toml"), &toml::to_string(&cfg)?)?;
    log::info!("wrote {}", cfg.out.display());
    Ok(())
}
