use rand_distr::{Distribution, StandardNormal};

use crate::embed::Pca;
use crate::model::{LinearHash, LinearKind};
use crate::{seed, CodeSet, DataMatrix, Error, Matrix, Result};

/// Random Gaussian projections thresholded at the median projection of
/// `data`, so every bit splits the training data in half.
pub fn lsh_fit(data: &Matrix, r: usize, seed_value: u64) -> Result<LinearHash> {
    let (n, d) = data.shape();
    if r == 0 {
        return Err(Error::invalid("code length must be at least 1"));
    }
    let mut rng = seed::rng(seed_value);
    let g: Vec<f64> = (0..d * r).map(|_| StandardNormal.sample(&mut rng)).collect();
    let projection = Matrix::from_vec(d, r, g)?;
    let offset = if n == 0 {
        vec![0.0; r]
    } else {
        let y = data.matmul(&projection);
        (0..r).map(|j| median(y.column(j))).collect()
    };
    LinearHash::new(LinearKind::Lsh, vec![0.0; d], projection, offset)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn lsh_baseline(data: &DataMatrix, r: usize, seed_value: u64) -> Result<(LinearHash, CodeSet)> {
    let h = lsh_fit(data.values(), r, seed_value)?;
    let codes = h.hash(data)?;
    Ok((h, codes))
}

/// Signs of the top `r` principal components of the centred data.
pub fn pcah_fit(data: &Matrix, r: usize) -> Result<LinearHash> {
    let pca = Pca::fit(data, r)?;
    LinearHash::new(LinearKind::Pcah, pca.mean, pca.components, vec![0.0; r])
}

pub fn pcah_baseline(data: &DataMatrix, r: usize) -> Result<(LinearHash, CodeSet)> {
    let h = pcah_fit(data.values(), r)?;
    let codes = h.hash(data)?;
    Ok((h, codes))
}
