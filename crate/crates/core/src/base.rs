//! Base-set selection: K-means centers or a uniform random sample of rows.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::{sq_dist, sq_dists_gram};
use crate::{seed, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMethod {
    Kmeans,
    Random,
}

impl std::str::FromStr for BaseMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            "random" => Ok(Self::Random),
            other => Err(Error::invalid(format!("unknown base method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaseSelection {
    pub method: BaseMethod,
    /// `m x d` base points.
    pub centers: Matrix,
    /// Cluster id per data row (K-means only).
    pub assignment: Option<Vec<usize>>,
    /// `n x m` squared distances to the base points, when retained.
    pub distances_to_base: Option<Matrix>,
    /// K-means objective after every assignment step (first entry: seeding).
    pub objective_trace: Vec<f64>,
    /// For random sampling, the selected row positions.
    pub rows: Option<Vec<usize>>,
}

impl BaseSelection {
    pub fn m(&self) -> usize {
        self.centers.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iters: usize,
    /// Keep the `n x m` distance matrix of the final assignment step.
    pub keep_distances: bool,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            keep_distances: false,
        }
    }
}

pub fn kmeans(data: &Matrix, m: usize, max_iters: usize, seed_value: u64) -> Result<BaseSelection> {
    kmeans_with(
        data,
        m,
        KMeansOptions {
            max_iters,
            ..Default::default()
        },
        seed_value,
    )
}

/// Lloyd's algorithm from a k-means++ seeding. Stops when assignments no
/// longer change or after `max_iters` update steps. Clusters that lose all
/// their points are re-seeded at the point farthest from its center.
pub fn kmeans_with(data: &Matrix, m: usize, opts: KMeansOptions, seed_value: u64) -> Result<BaseSelection> {
    let n = data.rows();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("K-means needs 1 <= m <= n = {n}, got m = {m}")));
    }
    if opts.max_iters == 0 {
        return Err(Error::invalid("K-means needs max_iters >= 1"));
    }
    if !data.is_finite() {
        return Err(Error::invalid("K-means input contains non-finite values"));
    }
    let mut rng = seed::rng(seed_value);
    let mut centers = kmeans_plus_plus(data, m, &mut rng);

    let (mut assign, mut dists) = assign_points(data, &centers);
    let mut trace = vec![objective(data, &centers, &assign)];
    for _ in 0..opts.max_iters {
        update_centers(data, &mut centers, &mut assign);
        let (next, d) = assign_points(data, &centers);
        trace.push(objective(data, &centers, &next));
        let changed = next != assign;
        assign = next;
        dists = d;
        if !changed {
            break;
        }
    }
    Ok(BaseSelection {
        method: BaseMethod::Kmeans,
        centers,
        assignment: Some(assign),
        distances_to_base: opts.keep_distances.then_some(dists),
        objective_trace: trace,
        rows: None,
    })
}

fn kmeans_plus_plus(data: &Matrix, m: usize, rng: &mut impl Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the running sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // all remaining points duplicate a chosen center
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        let c = data.row(next).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(i, v)| {
            let d = sq_dist(data.row(i), &c);
            if d < *v {
                *v = d;
            }
        });
    }
    data.select_rows(&chosen)
}

/// Nearest center per point (ties: lower index) and the full distance matrix.
fn assign_points(data: &Matrix, centers: &Matrix) -> (Vec<usize>, Matrix) {
    let dists = sq_dists_gram(data, centers);
    let assign = (0..data.rows())
        .into_par_iter()
        .map(|i| {
            let row = dists.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] < row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    (assign, dists)
}

fn objective(data: &Matrix, centers: &Matrix, assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(data.row(i), centers.row(c)))
        .sum()
}

fn update_centers(data: &Matrix, centers: &mut Matrix, assign: &mut [usize]) {
    let (m, d) = centers.shape();
    let mut sums = Matrix::zeros(m, d);
    let mut counts = vec![0usize; m];
    for (i, &c) in assign.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for c in 0..m {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        }
    }
    let empty: Vec<usize> = (0..m).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut far: Vec<(f64, usize)> = assign
        .iter()
        .enumerate()
        .map(|(i, &c)| (sq_dist(data.row(i), centers.row(c)), i))
        .collect();
    far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (c, &(_, i)) in empty.iter().zip(&far) {
        log::debug!("re-seeding empty cluster {c} at point {i}");
        centers.row_mut(*c).copy_from_slice(data.row(i));
        assign[i] = *c;
    }
}

/// `m` distinct rows chosen uniformly without replacement, in row order.
pub fn random_sample(data: &Matrix, m: usize, seed_value: u64) -> Result<BaseSelection> {
    let n = data.rows();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("random base needs 1 <= m <= n = {n}, got m = {m}")));
    }
    let mut rows = index::sample(&mut seed::rng(seed_value), n, m).into_vec();
    rows.sort_unstable();
    Ok(BaseSelection {
        method: BaseMethod::Random,
        centers: data.select_rows(&rows),
        assignment: None,
        distances_to_base: None,
        objective_trace: Vec::new(),
        rows: Some(rows),
    })
}

pub fn select_base(data: &Matrix, method: BaseMethod, m: usize, max_iters: usize, seed_value: u64) -> Result<BaseSelection> {
    match method {
        BaseMethod::Kmeans => kmeans(data, m, max_iters, seed_value),
        BaseMethod::Random => random_sample(data, m, seed_value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_manifold, SynthKind, SynthParams};

    fn clustered(n: usize, seed: u64) -> crate::DataMatrix {
        let p = SynthParams {
            clusters: 3,
            separation: 30.0,
            sigma: 1.0,
            ..Default::default()
        };
        synth_manifold(SynthKind::GaussianClusters, n, &p, seed).unwrap()
    }

    #[test]
    fn m_equals_n_reproduces_data() {
        let d = clustered(12, 1);
        let sel = kmeans(d.values(), 12, 10, 3).unwrap();
        assert_eq!(*sel.objective_trace.last().unwrap(), 0.0);
        let mut got: Vec<Vec<u64>> = sel.centers.row_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        let mut want: Vec<Vec<u64>> = d.values().row_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn separated_clusters_recover_means() {
        let d = clustered(300, 2);
        let sel = kmeans(d.values(), 3, 50, 7).unwrap();
        let labels = d.labels().unwrap();
        for c in 0..3i64 {
            let members: Vec<usize> = (0..d.n()).filter(|&i| labels[i] == c).collect();
            let mean = d.values().select_rows(&members).column_means();
            let best = sel
                .centers
                .row_iter()
                .map(|r| sq_dist(r, &mean))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-20, "cluster {c} mean not recovered: {best}");
        }
    }

    #[test]
    fn objective_is_non_increasing() {
        let d = synth_manifold(SynthKind::SwissRoll, 400, &SynthParams::default(), 5).unwrap();
        for s in 0..3 {
            let sel = kmeans(d.values(), 20, 50, s).unwrap();
            for w in sel.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", sel.objective_trace);
            }
            let counts = sel.assignment.as_ref().unwrap().iter().fold(vec![0; 20], |mut c, &a| {
                c[a] += 1;
                c
            });
            assert!(counts.iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let d = clustered(90, 3);
        let a = kmeans(d.values(), 5, 20, 1).unwrap();
        let b = kmeans(d.values(), 5, 20, 1).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn random_sample_rows() {
        let d = clustered(30, 4);
        let all = random_sample(d.values(), 30, 0).unwrap();
        assert_eq!(all.centers, *d.values());
        let one = random_sample(d.values(), 1, 9).unwrap();
        let r = one.rows.as_ref().unwrap()[0];
        assert_eq!(one.centers.row(0), d.row(r));
        assert_eq!(random_sample(d.values(), 5, 2).unwrap().rows, random_sample(d.values(), 5, 2).unwrap().rows);
    }

    #[test]
    fn rejects_bad_sizes() {
        let d = clustered(10, 0);
        assert!(kmeans(d.values(), 11, 5, 0).is_err());
        assert!(kmeans(d.values(), 2, 0, 0).is_err());
        assert!(random_sample(d.values(), 11, 0).is_err());
        let bad = Matrix::from_vec(2, 1, vec![0.0, f64::INFINITY]).unwrap();
        assert!(kmeans(&bad, 1, 5, 0).is_err());
    }

    #[test]
    fn keeps_distance_matrix_on_request() {
        let d = clustered(60, 5);
        let sel = kmeans_with(d.values(), 4, KMeansOptions { max_iters: 10, keep_distances: true }, 0).unwrap();
        let dist = sel.distances_to_base.unwrap();
        assert_eq!(dist.shape(), (60, 4));
        for i in 0..60 {
            let a = sel.assignment.as_ref().unwrap()[i];
            assert!((dist[(i, a)] - sq_dist(d.row(i), sel.centers.row(a))).abs() < 1e-9);
        }
    }
}
