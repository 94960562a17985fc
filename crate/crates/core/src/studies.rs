//! Experiment suites: base-selection comparison, base size / neighbour count
//! sensitivity, and the prototype concentration check.

use serde::Serialize;

use crate::base::{BaseMethod, BaseSelection};
use crate::dataset::{split, DataMatrix};
use crate::pipeline::{select_base_for, train_with_base, Method, StageTiming, TrainConfig};
use crate::prototype::{check_concentration_bound, greedy_k_center, BoundReport};
use crate::search::{build_ground_truth, evaluate, EvalOptions, GroundTruth, RetrievalReport, TruthMode};
use crate::{seed, Error, Matrix, Result};

/// Training data (also the retrieval database), queries and ground truth.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub train: DataMatrix,
    pub test: DataMatrix,
    pub truth: GroundTruth,
}

impl Experiment {
    pub fn new(train: DataMatrix, test: DataMatrix, mode: TruthMode) -> Result<Self> {
        let truth = build_ground_truth(&train, &test, mode)?;
        Ok(Self { train, test, truth })
    }

    /// Seeded split of `data` into `test_count` queries and the rest.
    pub fn from_split(data: &DataMatrix, test_count: usize, mode: TruthMode, seed_value: u64) -> Result<Self> {
        let (train, test) = split(data, test_count, seed_value)?.apply(data)?;
        Self::new(train, test, mode)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub method: Method,
    pub base_method: BaseMethod,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub map: f64,
    pub report: RetrievalReport,
    pub timings: Vec<StageTiming>,
}

/// Trains on the experiment's training data, hashes training and test data,
/// and evaluates.
pub fn run(exp: &Experiment, cfg: &TrainConfig, base: Option<&BaseSelection>, opts: &EvalOptions) -> Result<RunResult> {
    let trained = train_with_base(exp.train.values(), base, cfg)?;
    let db = trained.model.hash(&exp.train)?;
    let queries = trained.model.hash(&exp.test)?;
    let report = evaluate(&db, &queries, &exp.truth, opts)?;
    Ok(RunResult {
        method: cfg.method,
        base_method: cfg.base_method,
        m: cfg.m,
        k: cfg.k,
        r: cfg.r,
        seed: cfg.seed,
        map: report.map,
        report,
        timings: trained.timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub method: Method,
    pub base_method: BaseMethod,
    pub bits: usize,
    pub seed: u64,
    pub map: f64,
}

/// MAP for every (seed, base method, code length, method). The base set is
/// selected once per seed and base method and shared across the rest.
pub fn table1(exp: &Experiment, methods: &[Method], bits: &[usize], seeds: &[u64], template: &TrainConfig) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for &s in seeds {
        for base_method in [BaseMethod::Random, BaseMethod::Kmeans] {
            let cfg = TrainConfig {
                base_method,
                seed: s,
                ..template.clone()
            };
            let base = select_base_for(exp.train.values(), &cfg)?;
            for &r in bits {
                for &method in methods {
                    let cfg = TrainConfig { method, r, ..cfg.clone() };
                    let res = run(exp, &cfg, Some(&base), &EvalOptions::default())?;
                    log::info!("table1 seed={s} base={base_method:?} bits={r} {method}: MAP {:.4}", res.map);
                    rows.push(Table1Row {
                        method,
                        base_method,
                        bits: r,
                        seed: s,
                        map: res.map,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Mean MAP over the rows matching a filter.
pub fn mean_map<'a>(rows: impl IntoIterator<Item = &'a Table1Row>) -> f64 {
    let (sum, n) = rows.into_iter().fold((0.0, 0usize), |(s, n), r| (s + r.map, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Varying {
    M,
    K,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub method: Method,
    pub varying: Varying,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub map: f64,
}

/// MAP versus base size (at the template's `k`) and versus neighbour count
/// (at the template's `m`).
pub fn sensitivity(
    exp: &Experiment,
    methods: &[Method],
    ms: &[usize],
    ks: &[usize],
    seeds: &[u64],
    template: &TrainConfig,
) -> Result<Vec<SensitivityRow>> {
    let mut rows = Vec::new();
    let mut push = |res: RunResult, varying: Varying| {
        log::info!(
            "sensitivity {} m={} k={} seed={}: MAP {:.4}",
            res.method,
            res.m,
            res.k,
            res.seed,
            res.map
        );
        rows.push(SensitivityRow {
            method: res.method,
            varying,
            m: res.m,
            k: res.k,
            r: res.r,
            seed: res.seed,
            map: res.map,
        });
    };
    for &s in seeds {
        for &m in ms {
            let cfg = TrainConfig {
                m,
                seed: s,
                ..template.clone()
            };
            let base = select_base_for(exp.train.values(), &cfg)?;
            for &method in methods {
                let cfg = TrainConfig { method, ..cfg.clone() };
                push(run(exp, &cfg, Some(&base), &EvalOptions::default())?, Varying::M);
            }
        }
        if ks.is_empty() {
            continue;
        }
        let cfg = TrainConfig {
            seed: s,
            ..template.clone()
        };
        let base = select_base_for(exp.train.values(), &cfg)?;
        for &k in ks {
            for &method in methods {
                let cfg = TrainConfig { method, k, ..cfg.clone() };
                push(run(exp, &cfg, Some(&base), &EvalOptions::default())?, Varying::K);
            }
        }
    }
    Ok(rows)
}

/// Normalised Gaussian weights of `query` against every row of `y`.
pub fn gaussian_alpha(y: &Matrix, query: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if query.len() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: y.cols(),
            found: query.len(),
        });
    }
    let d: Vec<f64> = y.row_iter().map(|r| crate::matrix::sq_dist(r, query)).collect();
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d.iter().map(|&x| (-(x - dmin) / (sigma * sigma)).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Runs the concentration check for each `n'`, choosing `t` so that the
/// bound equals `target_bound` for the greedy covering radius.
pub fn bounds_study(
    y: &Matrix,
    alpha: &[f64],
    n_primes: &[usize],
    target_bound: f64,
    trials: usize,
    seed_value: u64,
) -> Result<Vec<BoundReport>> {
    if !(target_bound > 0.0) {
        return Err(Error::invalid("target bound must be positive"));
    }
    n_primes
        .iter()
        .map(|&np| {
            if np % 2 != 0 || np == 0 {
                return Err(Error::invalid(format!("n' must be a positive even number, got {np}")));
            }
            let eps = greedy_k_center(y, np / 2)?.radius;
            let t = if eps > 0.0 {
                (2.0 * eps * eps / (np as f64 * target_bound)).sqrt()
            } else {
                1e-12
            };
            check_concentration_bound(y, alpha, None, np, t, trials, seed::derive(seed_value, &format!("bound-{np}")))
        })
        .collect()
}
