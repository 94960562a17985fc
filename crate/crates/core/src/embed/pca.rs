//! Principal component analysis.

use super::eigh::{canonical_sign, eigh};
use super::{Backend, BaseEmbedding};
use crate::{Error, Matrix, Result};

/// Mean and leading principal directions of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d x r`, orthonormal columns (zero columns past the data rank).
    pub components: Matrix,
    /// Population variance along each component, descending.
    pub variances: Vec<f64>,
}

impl Pca {
    /// Fits the top `r` directions. Uses the `d x d` covariance or the
    /// `n x n` Gram matrix of the centred data, whichever is smaller.
    pub fn fit(data: &Matrix, r: usize) -> Result<Pca> {
        let (n, d) = data.shape();
        if n == 0 {
            return Err(Error::invalid("PCA needs at least one point"));
        }
        if r == 0 || r > d {
            return Err(Error::invalid(format!("PCA needs 1 <= r <= d = {d}, got r = {r}")));
        }
        let mean = data.column_means();
        let mut x = data.clone();
        x.sub_row_vector(&mean);
        let nf = n as f64;
        let (mut values, dirs) = if d <= n {
            let mut cov = x.t_matmul(&x);
            cov.scale(1.0 / nf);
            let e = eigh(&cov)?;
            (e.values, e.vectors)
        } else {
            // X X' u = s u  =>  X'u / sqrt(s) is a unit direction with variance s / n
            let mut gram = x.matmul_t(&x);
            gram.scale(1.0 / nf);
            let e = eigh(&gram)?;
            let mut dirs = x.t_matmul(&e.vectors);
            for (j, &s) in e.values.iter().enumerate() {
                let col = dirs.column(j);
                let len = crate::matrix::norm(&col);
                for i in 0..d {
                    dirs[(i, j)] = if s > 0.0 && len > 0.0 { col[i] / len } else { 0.0 };
                }
            }
            (e.values, dirs)
        };
        values.reverse();
        let total: f64 = values.iter().map(|v| v.abs()).sum();
        let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
        let k = values.len();
        let mut components = Matrix::zeros(d, r);
        let mut variances = vec![0.0; r];
        let mut rank = 0;
        for j in 0..r.min(k) {
            if values[j] <= tol {
                break;
            }
            let mut col = dirs.column(k - 1 - j);
            canonical_sign(&mut col);
            for (i, v) in col.into_iter().enumerate() {
                components[(i, j)] = v;
            }
            variances[j] = values[j];
            rank += 1;
        }
        if rank < r {
            log::warn!("data rank {rank} is below the requested {r} components; padding with zero directions");
        }
        Ok(Pca {
            mean,
            components,
            variances,
        })
    }

    pub fn r(&self) -> usize {
        self.components.cols()
    }

    /// `(X - mean) P`.
    pub fn project(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.cols(),
            });
        }
        let mut x = data.clone();
        x.sub_row_vector(&self.mean);
        Ok(x.matmul(&self.components))
    }
}

/// Base points projected on their top `r` principal directions.
pub fn embed_pca(base: &Matrix, r: usize) -> Result<BaseEmbedding> {
    let pca = Pca::fit(base, r)?;
    Ok(BaseEmbedding::new(pca.project(base)?, Backend::ImhPca))
}
