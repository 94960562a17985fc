//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. The MNIST criteria need `data/mnist` at the workspace root.

mod common;

use std::time::Instant;

use common::*;
use imh::base::BaseMethod;
use imh::dataset::{synth_manifold, SynthKind, SynthParams};
use imh::embed::tsne::run_tsne;
use imh::embed::{embed_le_base, embed_le_relaxed, CrossTerm, TsneConfig};
use imh::model::{load_model, save_model, Model};
use imh::pipeline::{select_base_for, train, Method, TrainConfig};
use imh::prototype::{greedy_k_center, weighted_mean, PrototypeSampler};
use imh::search::{average_precision, hamming_lookup, EvalOptions, HammingIndex, TruthMode};
use imh::studies::{bounds_study, gaussian_alpha, mean_map, run, table1, Experiment, Table1Row};
use imh::{seed, CodeSet, Matrix};

type Outcome = Result<(bool, String), String>;

struct Harness {
    failed: usize,
}

impl Harness {
    fn report(&mut self, id: &str, name: &str, limit_s: f64, seconds: f64, outcome: Outcome) {
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && seconds <= limit_s, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            self.failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {detail} ({seconds:.1} s, limit {limit_s:.0} s)",
            if pass { "PASS" } else { "FAIL" }
        );
    }

    fn check(&mut self, id: &str, name: &str, limit_s: f64, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let outcome = f();
        self.report(id, name, limit_s, t.elapsed().as_secs_f64(), outcome);
    }
}

fn e(err: imh::Error) -> String {
    err.to_string()
}

fn extension() -> Outcome {
    let mut rng = rng(101);
    let (mut grad, mut diff) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (g, d) = check_extension(&extension_case(&mut rng));
        grad = grad.max(g);
        diff = diff.max(d);
    }
    Ok((
        grad <= 1e-10 && diff <= 1e-8,
        format!("200 instances, max |gradient| {grad:.1e} (tol 1e-10), max |y - y_numerical| {diff:.1e} (tol 1e-8)"),
    ))
}

fn relaxed_le() -> Outcome {
    let mut rng = rng(202);
    let (mut orth, mut gap, mut le_b) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20 {
        let c = relaxed_case(&mut rng, if i < 5 { Some(0.0) } else { None });
        let y = embed_le_relaxed(&c.w_b, &c.w_xb, c.lambda, c.r, CrossTerm::Literal).map_err(e)?.values;
        let s = relaxed_operator(&c);
        orth = orth.max(orthogonality_error(&y));
        gap = gap.max((trace_objective(&y, &s) - relaxed_optimum(&s, c.r)).abs());
        if c.lambda == 0.0 {
            // per-column Rayleigh quotients against the base-graph embedding
            let base = embed_le_base(&c.w_b, c.r).map_err(e)?.values;
            let q = |y: &Matrix, j: usize| {
                let col = to_na(y).column(j).into_owned();
                (col.transpose() * &s * &col)[(0, 0)]
            };
            for j in 0..y.cols() {
                le_b = le_b.max((q(&y, j) - q(&base, j)).abs());
            }
        }
    }
    Ok((
        orth <= 1e-8 && gap <= 1e-8 && le_b <= 1e-8,
        format!("20 instances, max |Y'Y - mI| {orth:.1e}, max |objective - oracle| {gap:.1e}, lambda = 0 vs LE_B spectrum {le_b:.1e} (tol 1e-8)"),
    ))
}

fn tsne() -> Outcome {
    let mut rng = rng(303);
    let worst = (0..20).map(|_| tsne_gradient_error(&mut rng)).fold(0.0, f64::max);
    let data = synth_manifold(SynthKind::GaussianClusters, 90, &SynthParams::default(), 7).map_err(e)?;
    let mut increases = Vec::new();
    for s in 0..5u64 {
        let cfg = TsneConfig {
            kl_every: 10,
            seed: s,
            ..TsneConfig::default()
        };
        let hist = run_tsne(data.values(), 2, &cfg).map_err(e)?.kl_history;
        let post: Vec<f64> = hist.iter().filter(|(it, _)| *it >= cfg.exaggeration_iters).map(|h| h.1).collect();
        let worst_up = post.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if post.iter().any(|v| !v.is_finite()) {
            return Ok((false, format!("seed {s}: non-finite KL")));
        }
        increases.push(worst_up);
    }
    let monotone = increases.iter().all(|&d| d <= 0.0);
    Ok((
        worst < 1e-4 && monotone,
        format!(
            "max relative gradient error {worst:.1e} (tol 1e-4); largest KL change per 10-iteration window after exaggeration, per seed: {}",
            increases.iter().map(|d| format!("{d:+.1e}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

fn three_clusters() -> Result<Matrix, String> {
    Ok(synth_manifold(SynthKind::GaussianClusters, 600, &SynthParams::default(), 11)
        .map_err(e)?
        .values()
        .clone())
}

fn concentration() -> Outcome {
    let y = three_clusters()?;
    let alpha = gaussian_alpha(&y, y.row(0), 2.0).map_err(e)?;
    let reports = bounds_study(&y, &alpha, &[10, 50, 100], 0.25, 10_000, 0).map_err(e)?;
    let pass = reports.iter().all(|r| r.bound < 0.5 && r.empirical <= r.bound);
    let detail = reports
        .iter()
        .map(|r| format!("n'={}: eps {:.3}, t {:.3}, empirical {:.4} <= bound {:.4}", r.n_prime, r.epsilon, r.t, r.empirical, r.bound))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((pass, detail))
}

fn unbiasedness() -> Outcome {
    let y = three_clusters()?;
    let alpha = gaussian_alpha(&y, y.row(0), 2.0).map_err(e)?;
    let target = weighted_mean(&alpha, &y);
    let mut worst = 0.0f64;
    for np in [10usize, 50] {
        let kc = greedy_k_center(&y, np / 2).map_err(e)?;
        let sampler = PrototypeSampler::new(&alpha, &kc.clusters, np / 2).map_err(e)?;
        let mut rng = seed::stage_rng(0, &format!("prototype-{np}"));
        let trials = 10_000;
        let d = y.cols();
        let (mut sum, mut sumsq) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..trials {
            let est = sampler.sample(&y, &mut rng).estimate;
            for c in 0..d {
                sum[c] += est[c];
                sumsq[c] += est[c] * est[c];
            }
        }
        for c in 0..d {
            let mean = sum[c] / trials as f64;
            let var = (sumsq[c] / trials as f64 - mean * mean).max(0.0) * trials as f64 / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            worst = worst.max((mean - target[c]).abs() / se.max(f64::MIN_POSITIVE));
        }
    }
    Ok((
        worst <= 3.0,
        format!("n' in {{10, 50}}, 10^4 draws each: max |mean - target| = {worst:.2} standard errors (tol 3)"),
    ))
}

fn retrieval() -> Outcome {
    let mut rng = rng(606);
    let mut mismatches = 0;
    let mut cases = 0;
    for &r in &[1usize, 7, 32, 63, 64, 65, 128, 150] {
        let db = random_codes(&mut rng, 300, r, 1000);
        let index = HammingIndex::new(&db);
        let queries = random_codes(&mut rng, 20, r, 0);
        for q in 0..queries.len() {
            for radius in 0..=r.min(4) {
                let scan: Vec<u64> = (0..db.len())
                    .filter(|&j| slow_distance(&db, j, &queries, q) <= radius)
                    .map(|j| db.ids()[j])
                    .collect();
                let fast = hamming_lookup(&db, queries.code(q), radius).map_err(e)?;
                let indexed = index.lookup(queries.code(q), radius).map_err(e)?;
                cases += 1;
                if fast != scan || indexed != scan {
                    mismatches += 1;
                }
            }
        }
    }
    let ap = average_precision(&[true, false, true], 2);
    Ok((
        mismatches == 0 && ap == 5.0 / 6.0,
        format!("{cases} lookups, {mismatches} differ from the scan; AP(relevant at ranks 1 and 3) = {ap:?} (want {:?})", 5.0 / 6.0),
    ))
}

struct MnistRuns {
    exp: Experiment,
    template: TrainConfig,
    rows: Vec<Table1Row>,
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const IMH: [Method; 3] = [Method::ImhTsne, Method::ImhLeBase, Method::ImhLe];

fn mnist_table1() -> Result<MnistRuns, String> {
    let data = mnist(5500).ok_or_else(|| format!("MNIST not found under {}", mnist_dir().display()))?;
    let exp = Experiment::from_split(&data, 500, TruthMode::Labels, seed::derive(0, seed::SPLIT)).map_err(e)?;
    let template = TrainConfig {
        m: 400,
        k: 5,
        ..TrainConfig::default()
    };
    let rows = table1(&exp, &IMH, &[32, 64], &SEEDS, &template).map_err(e)?;
    Ok(MnistRuns { exp, template, rows })
}

fn avg(rows: &[Table1Row], method: Method, base: BaseMethod, bits: usize) -> f64 {
    mean_map(rows.iter().filter(|r| r.method == method && r.base_method == base && r.bits == bits))
}

fn ordering(runs: &MnistRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for bits in [32, 64] {
        for m in IMH {
            let (rnd, km) = (avg(&runs.rows, m, BaseMethod::Random, bits), avg(&runs.rows, m, BaseMethod::Kmeans, bits));
            pass &= km >= rnd;
            parts.push(format!("{m}@{bits} kmeans {km:.4} vs random {rnd:.4}"));
        }
    }
    let tsne = avg(&runs.rows, Method::ImhTsne, BaseMethod::Kmeans, 64);
    let le_b = avg(&runs.rows, Method::ImhLeBase, BaseMethod::Kmeans, 64);
    pass &= tsne >= le_b;
    parts.push(format!("tSNE@64 {tsne:.4} vs LE_B@64 {le_b:.4}"));
    Ok((pass, parts.join("; ")))
}

fn baseline_gap(runs: &MnistRuns) -> Outcome {
    let tsne = avg(&runs.rows, Method::ImhTsne, BaseMethod::Kmeans, 64);
    let mut maps = Vec::new();
    for method in [Method::Lsh, Method::Pcah] {
        let mut total = 0.0;
        for &s in &SEEDS {
            let cfg = TrainConfig {
                method,
                r: 64,
                seed: s,
                ..runs.template.clone()
            };
            total += run(&runs.exp, &cfg, None, &EvalOptions::default()).map_err(e)?.map;
        }
        maps.push(total / SEEDS.len() as f64);
    }
    let best = maps.iter().copied().fold(0.0, f64::max);
    Ok((
        tsne >= 1.1 * best,
        format!(
            "tSNE@64 {tsne:.4}, LSH {:.4}, PCAH {:.4}: ratio to best baseline {:.3} (need >= 1.1)",
            maps[0],
            maps[1],
            tsne / best
        ),
    ))
}

fn flatness(runs: &MnistRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for method in IMH {
        let mut by_m = Vec::new();
        for m in [200usize, 400, 800] {
            let map = if m == runs.template.m {
                avg(&runs.rows, method, BaseMethod::Kmeans, 64)
            } else {
                let mut total = 0.0;
                for &s in &SEEDS {
                    let cfg = TrainConfig {
                        method,
                        m,
                        r: 64,
                        seed: s,
                        ..runs.template.clone()
                    };
                    let base = select_base_for(runs.exp.train.values(), &cfg).map_err(e)?;
                    total += run(&runs.exp, &cfg, Some(&base), &EvalOptions::default()).map_err(e)?.map;
                }
                total / SEEDS.len() as f64
            };
            by_m.push(map);
        }
        let lo = by_m.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = by_m.iter().copied().fold(0.0, f64::max);
        let spread = (hi - lo) / lo;
        pass &= spread < 0.2;
        parts.push(format!(
            "{method} m=200/400/800: {:.4}/{:.4}/{:.4} spread {:.1}%",
            by_m[0],
            by_m[1],
            by_m[2],
            100.0 * spread
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn pipeline_once(dir: &std::path::Path, tag: &str) -> Result<Vec<u8>, String> {
    let data = synth_manifold(SynthKind::GaussianClusters, 1200, &SynthParams::default(), 5).map_err(e)?;
    let cfg = TrainConfig {
        m: 100,
        r: 32,
        seed: 9,
        ..TrainConfig::default()
    };
    let Model::Manifold(model) = train(data.values(), &cfg).map_err(e)?.model else {
        return Err("expected a manifold model".into());
    };
    let model_path = dir.join(format!("{tag}.model"));
    save_model(&model, &model_path).map_err(e)?;
    let loaded = load_model(&model_path).map_err(e)?;
    let codes_path = dir.join(format!("{tag}.codes"));
    loaded.hash(&data).map_err(e)?.save(&codes_path).map_err(e)?;
    let codes = CodeSet::load(&codes_path).map_err(e)?;
    if codes != model.hash(&data).map_err(e)? {
        return Err("codes from the reloaded model differ from the in-memory model".into());
    }
    std::fs::read(&codes_path).map_err(|err| err.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|err| err.to_string())?;
    let a = pipeline_once(dir.path(), "a")?;
    let b = pipeline_once(dir.path(), "b")?;
    Ok((a == b, format!("two train/save/load/encode runs, {} code bytes each, identical: {}", a.len(), a == b)))
}

fn main() {
    let mut h = Harness { failed: 0 };
    h.check("1", "closed-form extension", 5.0, extension);
    h.check("2", "relaxed LE solver", 10.0, relaxed_le);
    h.check("3", "t-SNE gradient and KL descent", 30.0, tsne);
    h.check("4", "concentration bound", 60.0, concentration);
    h.check("5", "prototype unbiasedness", 30.0, unbiasedness);
    h.check("6", "retrieval oracles", 5.0, retrieval);

    let t = Instant::now();
    let runs = mnist_table1();
    match runs {
        Ok(runs) => {
            let o7 = ordering(&runs);
            let o8 = baseline_gap(&runs);
            let s = t.elapsed().as_secs_f64();
            h.report("7", "MNIST base selection ordering", 600.0, s, o7);
            h.report("8", "MNIST baseline gap", 600.0, s, o8);
            h.check("9", "MNIST base size flatness", 900.0, || flatness(&runs));
        }
        Err(err) => {
            let s = t.elapsed().as_secs_f64();
            for (id, name) in [("7", "MNIST base selection ordering"), ("8", "MNIST baseline gap"), ("9", "MNIST base size flatness")] {
                h.report(id, name, 0.0, s, Err(err.clone()));
            }
        }
    }
    h.check("10", "deterministic persistence", 60.0, determinism);

    if h.failed > 0 {
        println!("failed: {} of 10 criteria", h.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
