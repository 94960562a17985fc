//! End-to-end training of a hash function from a training matrix.
//!
//! For the manifold methods the steps are: select the base set, pick the
//! bandwidth, compute the truncated affinities of the training data to the
//! base set, embed the base set, and centre the embedding on the training
//! mean. Randomness for each step comes from the run seed through
//! [`seed::derive`] with the stage names in [`seed`].

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affinity::{choose_bandwidth, gaussian_affinity, knn_weights, normalize_rows, Bandwidth};
use crate::base::{select_base, BaseMethod, BaseSelection};
use crate::embed::{center_embedding, embed_le_base, embed_le_relaxed, embed_pca, embed_tsne, Backend, CrossTerm, TsneConfig};
use crate::model::{HashModel, Model};
use crate::search::{lsh_fit, pcah_fit};
use crate::{seed, Error, Matrix, Result};

/// Hashing method: a manifold backend or a projection baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ImhTsne,
    ImhLe,
    ImhLeBase,
    ImhPca,
    Lsh,
    Pcah,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ImhTsne,
        Method::ImhLe,
        Method::ImhLeBase,
        Method::ImhPca,
        Method::Lsh,
        Method::Pcah,
    ];

    pub fn backend(self) -> Option<Backend> {
        match self {
            Method::ImhTsne => Some(Backend::ImhTsne),
            Method::ImhLe => Some(Backend::ImhLe),
            Method::ImhLeBase => Some(Backend::ImhLeBase),
            Method::ImhPca => Some(Backend::ImhPca),
            Method::Lsh | Method::Pcah => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsh => "lsh",
            Method::Pcah => "pcah",
            m => m.backend().expect("manifold method").name(),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SigmaMode {
    /// Mean distance to the `k`-th nearest base point over a sample of at
    /// most `sample` training points.
    MeanKnnDist { sample: usize },
    Fixed { sigma: f64 },
}

impl Default for SigmaMode {
    fn default() -> Self {
        SigmaMode::MeanKnnDist { sample: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    /// Base set size.
    pub m: usize,
    /// Nearest base points per extension.
    pub k: usize,
    /// Code length.
    pub r: usize,
    /// Weight of the base-to-rest term of the relaxed LE objective.
    pub lambda: f64,
    pub cross_term: CrossTerm,
    pub base_method: BaseMethod,
    pub kmeans_iters: usize,
    pub sigma: SigmaMode,
    /// t-SNE settings; its seed is replaced by one derived from `seed`.
    pub tsne: TsneConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::ImhTsne,
            m: 400,
            k: 5,
            r: 32,
            lambda: 2.0,
            cross_term: CrossTerm::Literal,
            base_method: BaseMethod::Kmeans,
            kmeans_iters: 50,
            sigma: SigmaMode::default(),
            tsne: TsneConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks every precondition that can be decided from the shapes alone.
    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.r == 0 {
            return Err(Error::invalid("code length r must be at least 1"));
        }
        if n == 0 {
            return Err(Error::invalid("training data is empty"));
        }
        let backend = match self.method.backend() {
            Some(b) => b,
            None => {
                if self.method == Method::Pcah && self.r > d {
                    return Err(Error::invalid(format!("pcah needs r <= d = {d}, got r = {}", self.r)));
                }
                return Ok(());
            }
        };
        let m = self.m;
        if m == 0 || m > n {
            return Err(Error::invalid(format!("base size m must satisfy 1 <= m <= n = {n}, got {m}")));
        }
        if self.k == 0 || self.k > m {
            return Err(Error::invalid(format!("k must satisfy 1 <= k <= m = {m}, got {}", self.k)));
        }
        if self.base_method == BaseMethod::Kmeans && self.kmeans_iters == 0 {
            return Err(Error::invalid("kmeans_iters must be at least 1"));
        }
        if let SigmaMode::Fixed { sigma } = self.sigma {
            Bandwidth::fixed(sigma)?;
        }
        let r = self.r;
        match backend {
            Backend::ImhLeBase if r >= m => {
                Err(Error::invalid(format!("imh-le-base needs r < m = {m}, got r = {r}")))
            }
            Backend::ImhLe if r + 1 >= m => {
                Err(Error::invalid(format!("imh-le needs r < m - 1 = {}, got r = {r}", m - 1)))
            }
            Backend::ImhLe if !(self.lambda >= 0.0 && self.lambda.is_finite()) => {
                Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)))
            }
            Backend::ImhPca if r > m.min(d) => {
                Err(Error::invalid(format!("imh-pca needs r <= min(m, d) = {}, got r = {r}", m.min(d))))
            }
            Backend::ImhTsne => self.tsne.validate(m),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub timings: Vec<StageTiming>,
}

struct Clock(Vec<StageTiming>, Instant);

impl Clock {
    fn new() -> Self {
        Clock(Vec::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.1).as_secs_f64(),
        });
        self.1 = now;
    }
}

/// The base set a config would select, for sharing across runs.
pub fn select_base_for(data: &Matrix, cfg: &TrainConfig) -> Result<BaseSelection> {
    select_base(data, cfg.base_method, cfg.m, cfg.kmeans_iters, seed::derive(cfg.seed, seed::BASE))
}

pub fn train(data: &Matrix, cfg: &TrainConfig) -> Result<Trained> {
    train_with_base(data, None, cfg)
}

/// Trains, reusing `base` when given (it must have `cfg.m` points of the
/// data's dimensionality).
pub fn train_with_base(data: &Matrix, base: Option<&BaseSelection>, cfg: &TrainConfig) -> Result<Trained> {
    let (n, d) = data.shape();
    cfg.validate(n, d)?;
    if !data.is_finite() {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    let mut clock = Clock::new();
    let backend = match cfg.method.backend() {
        Some(b) => b,
        None => {
            let h = match cfg.method {
                Method::Lsh => lsh_fit(data, cfg.r, seed::derive(cfg.seed, seed::LSH)),
                _ => pcah_fit(data, cfg.r),
            }
            .map_err(|e| e.in_stage("projection"))?;
            clock.lap("projection");
            return Ok(Trained {
                model: Model::Linear(h),
                timings: clock.0,
            });
        }
    };

    let selected;
    let base = match base {
        Some(b) => {
            if b.centers.shape() != (cfg.m, d) {
                return Err(Error::invalid(format!(
                    "supplied base set is {:?}, expected ({}, {d})",
                    b.centers.shape(),
                    cfg.m
                )));
            }
            b
        }
        None => {
            selected = select_base_for(data, cfg).map_err(|e| e.in_stage("base"))?;
            &selected
        }
    };
    let centers = &base.centers;
    clock.lap("base");

    let bw = match cfg.sigma {
        SigmaMode::Fixed { sigma } => Bandwidth::fixed(sigma),
        SigmaMode::MeanKnnDist { sample } => {
            choose_bandwidth(data, centers, cfg.k, sample, seed::derive(cfg.seed, seed::BANDWIDTH))
        }
    }
    .map_err(|e| e.in_stage("bandwidth"))?;
    clock.lap("bandwidth");

    let (w_xb, wbar) = knn_weights(data, centers, cfg.k, &bw)
        .and_then(|w| normalize_rows(&w).map(|n| (w, n)))
        .map_err(|e| e.in_stage("affinity"))?;
    clock.lap("affinity");

    let emb = match backend {
        Backend::ImhTsne => {
            let tsne = TsneConfig {
                seed: seed::derive(cfg.seed, seed::EMBED),
                ..cfg.tsne.clone()
            };
            embed_tsne(centers, cfg.r, &tsne)
        }
        Backend::ImhLeBase => embed_le_base(&gaussian_affinity(centers, &bw), cfg.r),
        Backend::ImhLe => embed_le_relaxed(&gaussian_affinity(centers, &bw), &w_xb, cfg.lambda, cfg.r, cfg.cross_term),
        Backend::ImhPca => embed_pca(centers, cfg.r),
    }
    .map_err(|e| e.in_stage("embed"))?;
    clock.lap("embed");

    let model = center_embedding(emb, &wbar)
        .and_then(|emb| HashModel::new(centers.clone(), emb, bw, cfg.k, base.method))
        .map_err(|e| e.in_stage("center"))?;
    clock.lap("center");
    Ok(Trained {
        model: Model::Manifold(model),
        timings: clock.0,
    })
}
