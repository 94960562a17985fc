//! Laplacian-eigenmap embeddings of the base set.
//!
//! Both variants minimise `trace(Y' A Y)` subject to `Y'Y = m I` and
//! `Y'1 = 0`. The constant direction is removed exactly with a Householder
//! reflector `H` (`H e_1 = 1/sqrt(m)`): the spectrum of `A` restricted to the
//! complement of `1` is that of the trailing `(m-1) x (m-1)` block of `H A H`.

use serde::{Deserialize, Serialize};

use super::eigh::{canonical_sign, eigh};
use super::{Backend, BaseEmbedding};
use crate::affinity::{normalize_rows, AffinityWeights};
use crate::{Error, Matrix, Result};

/// How the cross term `T` of the relaxed objective is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerm {
    /// `T = diag(W' 1) - Wbar' W`: one factor row-normalised, one raw.
    #[default]
    Literal,
    /// `T = diag(Wbar' 1) - Wbar' Wbar`.
    BothNormalized,
}

/// Eigenpairs of `A` on the orthogonal complement of the constant vector,
/// ascending. Columns of `vectors` are unit, orthogonal to `1`, and
/// sign-canonical.
#[derive(Debug, Clone)]
pub struct DeflatedSpectrum {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn deflated_eigh(a: &Matrix) -> Result<DeflatedSpectrum> {
    let m = a.rows();
    if m < 2 || a.cols() != m {
        return Err(Error::invalid(format!("deflation needs a square matrix with m >= 2, got {:?}", a.shape())));
    }
    let q = 1.0 / (m as f64).sqrt();
    let mut u = vec![-q; m];
    u[0] += 1.0;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let mut h = Matrix::identity(m);
    for i in 0..m {
        for j in 0..m {
            h[(i, j)] -= 2.0 * u[i] * u[j] / uu;
        }
    }
    let hah = h.matmul(&a.symmetrized()).matmul(&h);
    let mut block = Matrix::zeros(m - 1, m - 1);
    for i in 1..m {
        block.row_mut(i - 1).copy_from_slice(&hah.row(i)[1..]);
    }
    let e = eigh(&block)?;
    // vectors = H[:, 1..] * V
    let mut h_tail = Matrix::zeros(m, m - 1);
    for i in 0..m {
        h_tail.row_mut(i).copy_from_slice(&h.row(i)[1..]);
    }
    let mut vectors = h_tail.matmul(&e.vectors);
    for j in 0..m - 1 {
        let mut col = vectors.column(j);
        canonical_sign(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            vectors[(i, j)] = v;
        }
    }
    Ok(DeflatedSpectrum {
        values: e.values,
        vectors,
    })
}

/// `L = D - W` with `D = diag(W 1)`.
pub fn laplacian(w: &Matrix) -> Matrix {
    let m = w.rows();
    let mut l = Matrix::zeros(m, m);
    for i in 0..m {
        let mut deg = 0.0;
        for j in 0..m {
            if i != j {
                l[(i, j)] = -w[(i, j)];
                deg += w[(i, j)];
            }
        }
        l[(i, i)] = deg;
    }
    l
}

fn check_affinity(w: &Matrix) -> Result<()> {
    let m = w.rows();
    if w.cols() != m {
        return Err(Error::invalid("base affinity must be square"));
    }
    for i in 0..m {
        if w[(i, i)] != 0.0 {
            return Err(Error::invalid(format!("base affinity has nonzero diagonal at {i}")));
        }
        for j in 0..m {
            let v = w[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("base affinity entry ({i}, {j}) = {v} is not a finite nonnegative weight")));
            }
            if (v - w[(j, i)]).abs() > 1e-10 * (1.0 + v.abs()) {
                return Err(Error::invalid(format!("base affinity is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn take_smallest(spec: &DeflatedSpectrum, r: usize, backend: Backend) -> BaseEmbedding {
    let m = spec.vectors.rows();
    let mut y = spec.vectors.leading_columns(r);
    y.scale((m as f64).sqrt());
    BaseEmbedding::new(y, backend)
}

/// Near-zero threshold for Laplacian spectra.
fn zero_tol(values: &[f64]) -> f64 {
    1e-9 * values.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

/// Laplacian eigenmaps on the base graph alone: the `r` eigenvectors of
/// `D - W_B` with the smallest eigenvalues after the constant one, scaled so
/// that `Y'Y = m I`.
///
/// A disconnected graph has further zero eigenvalues (component indicators);
/// they are kept, as they are the coarsest informative directions, and a
/// warning is logged.
pub fn embed_le_base(w_b: &Matrix, r: usize) -> Result<BaseEmbedding> {
    check_affinity(w_b)?;
    let m = w_b.rows();
    if r == 0 || r >= m {
        return Err(Error::invalid(format!("LE embedding needs 1 <= r < m = {m}, got r = {r}")));
    }
    let spec = deflated_eigh(&laplacian(w_b))?;
    let tol = zero_tol(&spec.values);
    let extra_zero = spec.values.iter().filter(|&&v| v.abs() <= tol).count();
    if extra_zero > 0 {
        log::warn!(
            "base graph is disconnected: {} components; keeping {extra_zero} component-indicator modes",
            extra_zero + 1
        );
    }
    Ok(take_smallest(&spec, r, Backend::ImhLeBase))
}

/// `M + lambda T` for the relaxed objective, symmetrised.
///
/// `w_xb` holds the raw (unnormalised) truncated weights between the training
/// points and the base set.
pub fn relaxed_le_operator(w_b: &Matrix, w_xb: &AffinityWeights, lambda: f64, cross: CrossTerm) -> Result<Matrix> {
    check_affinity(w_b)?;
    let m = w_b.rows();
    if w_xb.m() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: w_xb.m(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if w_xb.is_normalized() {
        return Err(Error::invalid("relaxed LE expects raw (unnormalised) cross weights"));
    }
    let wbar = normalize_rows(w_xb)?;
    let right = match cross {
        CrossTerm::Literal => w_xb,
        CrossTerm::BothNormalized => &wbar,
    };
    let mut t = Matrix::from_diag(&right.column_sums());
    for i in 0..w_xb.n() {
        let (ia, va) = wbar.row(i);
        let (ib, vb) = right.row(i);
        for (&a, &wa) in ia.iter().zip(va) {
            for (&b, &wb) in ib.iter().zip(vb) {
                t[(a as usize, b as usize)] -= wa * wb;
            }
        }
    }
    let mut op = laplacian(w_b);
    for (o, tv) in op.as_mut_slice().iter_mut().zip(t.as_slice()) {
        *o += lambda * tv;
    }
    Ok(op.symmetrized())
}

/// Relaxed similarity-preserving embedding: the `r` eigenvectors of
/// `M + lambda T` with the smallest eigenvalues on the complement of the
/// constant vector, scaled so that `Y'Y = m I`.
pub fn embed_le_relaxed(w_b: &Matrix, w_xb: &AffinityWeights, lambda: f64, r: usize, cross: CrossTerm) -> Result<BaseEmbedding> {
    let m = w_b.rows();
    if r == 0 || r + 1 >= m {
        return Err(Error::invalid(format!("relaxed LE needs 1 <= r < m - 1 = {}, got r = {r}", m.saturating_sub(1))));
    }
    let op = relaxed_le_operator(w_b, w_xb, lambda, cross)?;
    let spec = deflated_eigh(&op)?;
    Ok(take_smallest(&spec, r, Backend::ImhLe))
}
