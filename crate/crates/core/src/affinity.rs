//! Truncated Gaussian affinities between points and base points.
//!
//! `w(x, c) = exp(-|x - c|^2 / sigma^2)` when `c` is one of the `k` nearest
//! base points of `x`, zero otherwise. Normalising each row gives the
//! extension weights used to place `x` in the embedding.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::sq_dist;
use crate::{seed, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthHeuristic {
    Fixed,
    MeanKnnDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    sigma: f64,
    heuristic: BandwidthHeuristic,
}

impl Bandwidth {
    pub fn fixed(sigma: f64) -> Result<Self> {
        Self::new(sigma, BandwidthHeuristic::Fixed)
    }

    pub fn new(sigma: f64, heuristic: BandwidthHeuristic) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma, heuristic })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn heuristic(&self) -> BandwidthHeuristic {
        self.heuristic
    }

    #[inline]
    pub fn weight(&self, sq_distance: f64) -> f64 {
        (-sq_distance / (self.sigma * self.sigma)).exp()
    }
}

/// Sparse `n x m` weights with a fixed number of nonzeros per row.
///
/// Row entries are ordered by increasing distance, ties by lower base index.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityWeights {
    n: usize,
    m: usize,
    k: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
    /// Squared distances of the nonzeros, when known; lets normalisation
    /// survive rows whose raw weights all underflow.
    sq_dists: Option<Vec<f64>>,
    sigma: Option<f64>,
    normalized: bool,
}

impl AffinityWeights {
    /// Builds weights from explicit per-row `(index, value)` lists, each of
    /// length `k`.
    pub fn from_rows(m: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let mut indices = Vec::with_capacity(rows.len() * k);
        let mut values = Vec::with_capacity(rows.len() * k);
        for r in rows {
            if r.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: r.len(),
                });
            }
            for &(j, v) in r {
                if j >= m || !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("bad weight entry ({j}, {v}) for m = {m}")));
                }
                indices.push(j as u32);
                values.push(v);
            }
        }
        Ok(Self {
            n: rows.len(),
            m,
            k,
            indices,
            values,
            sq_dists: None,
            sigma: None,
            normalized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Nonzeros per row.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let s = i * self.k..(i + 1) * self.k;
        (&self.indices[s.clone()], &self.values[s])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// Per-column sums, `W' 1`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.m];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            s[j as usize] += v;
        }
        s
    }

    pub fn to_dense(&self) -> Matrix {
        let mut d = Matrix::zeros(self.n, self.m);
        for i in 0..self.n {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                d[(i, j as usize)] = v;
            }
        }
        d
    }

    /// `W Y` for a dense `m x r` matrix.
    pub fn mul_dense(&self, y: &Matrix) -> Matrix {
        assert_eq!(y.rows(), self.m, "row count of Y must equal the number of base points");
        let mut out = Matrix::zeros(self.n, y.cols());
        for i in 0..self.n {
            let (idx, val) = self.row(i);
            let o = out.row_mut(i);
            for (&j, &w) in idx.iter().zip(val) {
                for (a, b) in o.iter_mut().zip(y.row(j as usize)) {
                    *a += w * b;
                }
            }
        }
        out
    }
}

/// Truncated Gaussian weights from every row of `points` to its `k` nearest
/// rows of `base`. The result is unnormalised.
pub fn knn_weights(points: &Matrix, base: &Matrix, k: usize, bw: &Bandwidth) -> Result<AffinityWeights> {
    let m = base.rows();
    if m == 0 {
        return Err(Error::invalid("base set is empty"));
    }
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k must satisfy 1 <= k <= m = {m}, got {k}")));
    }
    if points.cols() != base.cols() {
        return Err(Error::DimensionMismatch {
            expected: base.cols(),
            found: points.cols(),
        });
    }
    let n = points.rows();
    let mut indices = vec![0u32; n * k];
    let mut sq = vec![0.0; n * k];
    indices
        .par_chunks_mut(k)
        .zip(sq.par_chunks_mut(k))
        .enumerate()
        .for_each(|(i, (idx, dist))| {
            nearest_bases(points.row(i), base, idx, dist);
        });
    let values = sq.iter().map(|&d| bw.weight(d)).collect();
    Ok(AffinityWeights {
        n,
        m,
        k,
        indices,
        values,
        sq_dists: Some(sq),
        sigma: Some(bw.sigma()),
        normalized: false,
    })
}

/// Fills `idx`/`dist` with the `idx.len()` nearest base rows to `x`, ascending
/// by squared distance, ties by lower index.
pub(crate) fn nearest_bases(x: &[f64], base: &Matrix, idx: &mut [u32], dist: &mut [f64]) {
    let k = idx.len();
    let mut len = 0usize;
    for (j, c) in base.row_iter().enumerate() {
        let d = sq_dist(x, c);
        // strict comparison keeps the earlier (lower) index on ties
        if len == k && d >= dist[k - 1] {
            continue;
        }
        let mut pos = len.min(k - 1);
        if len < k {
            len += 1;
        }
        while pos > 0 && dist[pos - 1] > d {
            dist[pos] = dist[pos - 1];
            idx[pos] = idx[pos - 1];
            pos -= 1;
        }
        dist[pos] = d;
        idx[pos] = j as u32;
    }
}

/// Scales every row to sum to one, keeping the sparsity pattern.
pub fn normalize_rows(w: &AffinityWeights) -> Result<AffinityWeights> {
    let mut out = w.clone();
    for i in 0..w.n {
        let s = i * w.k..(i + 1) * w.k;
        let sum: f64 = w.values[s.clone()].iter().sum();
        if sum.is_normal() {
            out.values[s].iter_mut().for_each(|v| *v /= sum);
            continue;
        }
        // every raw weight underflowed: recompute relative to the nearest base
        match (&w.sq_dists, w.sigma) {
            (Some(sq), Some(sigma)) => {
                let d = &sq[s.clone()];
                let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
                let shifted: Vec<f64> = d.iter().map(|&x| (-(x - dmin) / (sigma * sigma)).exp()).collect();
                let total: f64 = shifted.iter().sum();
                for (o, v) in out.values[s].iter_mut().zip(shifted) {
                    *o = v / total;
                }
            }
            _ => {
                return Err(Error::Degenerate(format!("row {i} has non-positive weight sum {sum}")));
            }
        }
    }
    out.normalized = true;
    Ok(out)
}

/// Mean distance from a sample of points to their `k`-th nearest base point.
///
/// At most `sample` points are used; with `n <= sample` every point is used,
/// otherwise a seeded uniform subset.
pub fn choose_bandwidth(points: &Matrix, base: &Matrix, k: usize, sample: usize, seed_value: u64) -> Result<Bandwidth> {
    if points.rows() == 0 || base.rows() == 0 {
        return Err(Error::invalid("bandwidth heuristic needs nonempty points and base"));
    }
    if k == 0 || k > base.rows() {
        return Err(Error::invalid(format!("k must satisfy 1 <= k <= m = {}, got {k}", base.rows())));
    }
    if points.cols() != base.cols() {
        return Err(Error::DimensionMismatch {
            expected: base.cols(),
            found: points.cols(),
        });
    }
    let rows: Vec<usize> = if points.rows() <= sample {
        (0..points.rows()).collect()
    } else {
        let mut r = index::sample(&mut seed::rng(seed_value), points.rows(), sample.max(1)).into_vec();
        r.sort_unstable();
        r
    };
    let kth: Vec<f64> = rows
        .par_iter()
        .map(|&i| {
            let mut idx = vec![0u32; k];
            let mut dist = vec![0.0; k];
            nearest_bases(points.row(i), base, &mut idx, &mut dist);
            dist[k - 1].sqrt()
        })
        .collect();
    let sigma = kth.iter().sum::<f64>() / kth.len() as f64;
    if sigma <= 0.0 {
        return Err(Error::Degenerate(
            "all sampled k-th neighbour distances are zero; set a fixed sigma instead".into(),
        ));
    }
    Bandwidth::new(sigma, BandwidthHeuristic::MeanKnnDist)
}

/// Dense Gaussian affinity among the rows of `base`, with a zero diagonal.
pub fn gaussian_affinity(base: &Matrix, bw: &Bandwidth) -> Matrix {
    let m = base.rows();
    let mut w = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v = bw.weight(sq_dist(base.row(i), base.row(j)));
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}
