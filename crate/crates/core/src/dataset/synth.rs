use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DataMatrix;
use crate::{seed, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    SwissRoll,
    GaussianClusters,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss_roll" | "swiss-roll" => Ok(Self::SwissRoll),
            "gaussian_clusters" | "gaussian-clusters" => Ok(Self::GaussianClusters),
            other => Err(Error::invalid(format!("unknown synthetic dataset kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Number of Gaussian clusters.
    pub clusters: usize,
    /// Ambient dimensionality (clusters: at least 2; swiss roll: at least 3,
    /// extra coordinates are zero).
    pub dims: usize,
    /// Distance between neighbouring cluster centers.
    pub separation: f64,
    /// Per-coordinate standard deviation within a cluster.
    pub sigma: f64,
    /// Swiss roll: isotropic noise standard deviation.
    pub noise: f64,
    /// Swiss roll: number of label segments along the roll.
    pub segments: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            clusters: 3,
            dims: 2,
            separation: 10.0,
            sigma: 1.0,
            noise: 0.05,
            segments: 4,
        }
    }
}

/// Cluster centers used by the Gaussian generator: evenly spaced on a circle
/// in the first two coordinates, neighbours `separation` apart.
pub fn gaussian_cluster_centers(p: &SynthParams) -> Matrix {
    let k = p.clusters.max(1);
    let d = p.dims.max(2);
    let radius = if k == 1 {
        0.0
    } else {
        p.separation / (2.0 * (PI / k as f64).sin())
    };
    let mut c = Matrix::zeros(k, d);
    for j in 0..k {
        let a = 2.0 * PI * j as f64 / k as f64;
        c[(j, 0)] = radius * a.cos();
        c[(j, 1)] = radius * a.sin();
    }
    c
}

/// Deterministic synthetic data. Labels are the cluster index (point `i`
/// belongs to cluster `i % clusters`) or the roll segment.
pub fn synth_manifold(kind: SynthKind, n: usize, p: &SynthParams, seed_value: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::invalid("synthetic dataset needs n >= 1"));
    }
    let mut rng = seed::rng(seed_value);
    let (values, labels, name) = match kind {
        SynthKind::GaussianClusters => {
            if p.clusters == 0 || !(p.sigma >= 0.0) {
                return Err(Error::invalid("gaussian_clusters needs clusters >= 1 and sigma >= 0"));
            }
            let centers = gaussian_cluster_centers(p);
            let d = centers.cols();
            let mut v = Matrix::zeros(n, d);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let c = i % p.clusters;
                for (x, m) in v.row_mut(i).iter_mut().zip(centers.row(c)) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = m + p.sigma * z;
                }
                labels.push(c as i64);
            }
            (v, labels, "gaussian_clusters")
        }
        SynthKind::SwissRoll => {
            let d = p.dims.max(3);
            let segments = p.segments.max(1);
            let mut v = Matrix::zeros(n, d);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let u: f64 = rng.random();
                let t = 1.5 * PI * (1.0 + 2.0 * u);
                let h: f64 = 21.0 * rng.random::<f64>();
                let row = v.row_mut(i);
                row[0] = t * t.cos();
                row[1] = h;
                row[2] = t * t.sin();
                for x in row.iter_mut().take(3) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x += p.noise * z;
                }
                labels.push(((u * segments as f64) as usize).min(segments - 1) as i64);
            }
            (v, labels, "swiss_roll")
        }
    };
    DataMatrix::from_matrix(values, format!("synth:{name}:n={n}:seed={seed_value}"))?.with_labels(labels)
}
