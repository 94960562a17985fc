//! Sampled prototype estimator and its concentration check.
//!
//! Given weights `alpha` over `n` embedded points `Y` and a partition of the
//! points into clusters, cluster `j` has mass `C_j = sum_{i in I_j} alpha_i`
//! and receives `l_j = floor(m C_j + 1)` draws `u` with
//! `Pr(u = i) = alpha_i / C_j`. The estimate
//! `y_hat = sum_j C_j / l_j * sum_u y_u` is unbiased for `sum_i alpha_i y_i`.
//!
//! With `m = n' / 2` clusters each contained in a ball of radius `eps`, the
//! estimator's variance is at most `eps^2 / m`, so by Chebyshev
//! `Pr[|y_hat - y| >= t] <= 2 eps^2 / (n' t^2)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::matrix::sq_dist;
use crate::{seed, Error, Matrix, Result};

/// One realisation of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeDraw {
    /// `C_j` for every cluster.
    pub masses: Vec<f64>,
    /// `l_j`; zero for clusters of zero mass, which are skipped.
    pub counts: Vec<usize>,
    /// Drawn point indices per cluster.
    pub indices: Vec<Vec<usize>>,
    pub estimate: Vec<f64>,
}

/// Precomputed sampling laws for repeated draws.
#[derive(Debug, Clone)]
pub struct PrototypeSampler {
    masses: Vec<f64>,
    counts: Vec<usize>,
    members: Vec<Vec<usize>>,
    laws: Vec<Option<WeightedIndex<f64>>>,
}

impl PrototypeSampler {
    pub fn new(alpha: &[f64], clusters: &[Vec<usize>], m: usize) -> Result<Self> {
        let n = alpha.len();
        if m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and nonnegative, found {a}")));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("alpha must sum to 1, sums to {total}")));
        }
        let mut seen = vec![false; n];
        for c in clusters {
            for &i in c {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(format!("clusters must partition 0..{n}; index {i} is out of range or repeated")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("clusters must partition 0..{n}; index {i} is missing")));
        }
        let mut masses = Vec::with_capacity(clusters.len());
        let mut counts = Vec::with_capacity(clusters.len());
        let mut laws = Vec::with_capacity(clusters.len());
        for c in clusters {
            let w: Vec<f64> = c.iter().map(|&i| alpha[i]).collect();
            let mass: f64 = w.iter().sum();
            masses.push(mass);
            if mass > 0.0 {
                counts.push((m as f64 * mass + 1.0).floor() as usize);
                laws.push(Some(WeightedIndex::new(&w).map_err(|e| Error::invalid(e.to_string()))?));
            } else {
                counts.push(0);
                laws.push(None);
            }
        }
        Ok(Self {
            masses,
            counts,
            members: clusters.to_vec(),
            laws,
        })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of draws, `sum_j l_j`.
    pub fn draws(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn sample(&self, y: &Matrix, rng: &mut impl Rng) -> PrototypeDraw {
        let mut estimate = vec![0.0; y.cols()];
        let mut indices = Vec::with_capacity(self.members.len());
        for (j, law) in self.laws.iter().enumerate() {
            let mut picked = Vec::with_capacity(self.counts[j]);
            if let Some(law) = law {
                let scale = self.masses[j] / self.counts[j] as f64;
                for _ in 0..self.counts[j] {
                    let i = self.members[j][law.sample(rng)];
                    for (e, v) in estimate.iter_mut().zip(y.row(i)) {
                        *e += scale * v;
                    }
                    picked.push(i);
                }
            }
            indices.push(picked);
        }
        PrototypeDraw {
            masses: self.masses.clone(),
            counts: self.counts.clone(),
            indices,
            estimate,
        }
    }
}

/// One draw of the prototype estimator.
pub fn prototype_estimate(alpha: &[f64], y: &Matrix, clusters: &[Vec<usize>], m: usize, seed_value: u64) -> Result<PrototypeDraw> {
    if alpha.len() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: y.rows(),
            found: alpha.len(),
        });
    }
    let s = PrototypeSampler::new(alpha, clusters, m)?;
    Ok(s.sample(y, &mut seed::rng(seed_value)))
}

/// `sum_i alpha_i y_i`.
pub fn weighted_mean(alpha: &[f64], y: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; y.cols()];
    for (a, row) in alpha.iter().zip(y.row_iter()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += a * v;
        }
    }
    out
}

/// Greedy farthest-point clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct KCenter {
    /// Row indices of the chosen centers, in selection order.
    pub centers: Vec<usize>,
    /// Cluster members, one list per center.
    pub clusters: Vec<Vec<usize>>,
    /// Largest distance from a point to its assigned center.
    pub radius: f64,
}

/// Greedy k-center starting from row 0; the radius is within a factor two of
/// the optimal covering radius and is itself a covering radius with `k`
/// balls, hence an upper bound on the `k`-th entropy number.
pub fn greedy_k_center(y: &Matrix, k: usize) -> Result<KCenter> {
    let n = y.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k-center needs 1 <= k <= n = {n}, got {k}")));
    }
    let mut centers = vec![0usize];
    let mut nearest = vec![0usize; n];
    let mut dist: Vec<f64> = y.row_iter().map(|r| sq_dist(r, y.row(0))).collect();
    while centers.len() < k {
        let (far, &d) = dist
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if d <= 0.0 {
            break;
        }
        let c = centers.len();
        centers.push(far);
        for i in 0..n {
            let di = sq_dist(y.row(i), y.row(far));
            if di < dist[i] {
                dist[i] = di;
                nearest[i] = c;
            }
        }
    }
    let mut clusters = vec![Vec::new(); centers.len()];
    for (i, &c) in nearest.iter().enumerate() {
        clusters[c].push(i);
    }
    let radius = dist.iter().copied().fold(0.0, f64::max).sqrt();
    Ok(KCenter { centers, clusters, radius })
}

/// Covering radius of a given partition: for each cluster the smallest, over
/// its members, of the largest distance to the other members.
pub fn partition_radius(y: &Matrix, clusters: &[Vec<usize>]) -> f64 {
    clusters
        .iter()
        .map(|c| {
            c.iter()
                .map(|&a| c.iter().map(|&b| sq_dist(y.row(a), y.row(b))).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n_prime: usize,
    pub t: f64,
    pub trials: usize,
    pub clusters: usize,
    /// Total draws `sum_j l_j` per estimate (at most `n'`).
    pub draws: usize,
    /// Covering radius used in place of the entropy number.
    pub epsilon: f64,
    pub bound: f64,
    pub failures: usize,
    pub empirical: f64,
    pub pass: bool,
}

/// Monte-Carlo check of `Pr[|y_hat - y| >= t] <= 2 eps^2 / (n' t^2)`.
///
/// Without explicit `clusters`, `Y` is covered by greedy k-center with
/// `n'/2` centers. Explicit clusters must number at most `n'/2`. Trial `i`
/// draws from its own generator seeded by `(seed, i)`.
pub fn check_concentration_bound(
    y: &Matrix,
    alpha: &[f64],
    clusters: Option<&[Vec<usize>]>,
    n_prime: usize,
    t: f64,
    trials: usize,
    seed_value: u64,
) -> Result<BoundReport> {
    let n = y.rows();
    if n_prime == 0 || n_prime % 2 != 0 {
        return Err(Error::invalid(format!("n' must be a positive even number, got {n_prime}")));
    }
    if n_prime > n {
        return Err(Error::invalid(format!("n' = {n_prime} exceeds n = {n}")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if alpha.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: alpha.len() });
    }
    let half = n_prime / 2;
    let (parts, epsilon) = match clusters {
        Some(c) => {
            if c.len() > half {
                return Err(Error::invalid(format!("{} clusters exceed n'/2 = {half}", c.len())));
            }
            (c.to_vec(), partition_radius(y, c))
        }
        None => {
            let kc = greedy_k_center(y, half)?;
            (kc.clusters, kc.radius)
        }
    };
    let sampler = PrototypeSampler::new(alpha, &parts, half)?;
    let target = weighted_mean(alpha, y);
    let failures = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seed::rng(seed::derive(seed_value, &format!("trial-{i}")));
            let d = sampler.sample(y, &mut rng);
            sq_dist(&d.estimate, &target).sqrt() >= t
        })
        .count();
    let bound = 2.0 * epsilon * epsilon / (n_prime as f64 * t * t);
    let empirical = if trials == 0 { 0.0 } else { failures as f64 / trials as f64 };
    Ok(BoundReport {
        n_prime,
        t,
        trials,
        clusters: parts.len(),
        draws: sampler.draws(),
        epsilon,
        bound,
        failures,
        empirical,
        pass: empirical <= bound,
    })
}
