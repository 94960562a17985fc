//! Exact t-SNE.
//!
//! Input similarities `P` are symmetrised conditional Gaussians whose
//! per-point bandwidths are found by binary search on the perplexity; output
//! similarities use a Student-t kernel. `KL(P || Q)` is minimised by gradient
//! descent with momentum, per-coordinate gains and early exaggeration.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Backend, BaseEmbedding};
use crate::matrix::sq_dists_gram;
use crate::{seed, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    /// `None` picks `min(30, (m - 1) / 3)`.
    pub perplexity: Option<f64>,
    pub iters: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Record the (unexaggerated) KL every this many iterations; 0 disables.
    pub kl_every: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: None,
            iters: 1000,
            learning_rate: 100.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch: 250,
            exaggeration: 4.0,
            exaggeration_iters: 100,
            kl_every: 50,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn perplexity_for(&self, m: usize) -> f64 {
        self.perplexity.unwrap_or_else(|| (30.0f64).min((m as f64 - 1.0) / 3.0))
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 4 {
            return Err(Error::invalid(format!("t-SNE needs at least 4 points, got {m}")));
        }
        let p = self.perplexity_for(m);
        let max = (m as f64 - 1.0) / 3.0;
        if !(p > 0.0) || p > max {
            return Err(Error::invalid(format!("perplexity {p} is infeasible for m = {m} (must be in (0, {max}])")));
        }
        let positive = [self.learning_rate, self.exaggeration, self.momentum_final];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !(self.momentum_initial >= 0.0) {
            return Err(Error::invalid("t-SNE learning rate, momenta and exaggeration must be positive"));
        }
        if self.momentum_initial >= 1.0 || self.momentum_final >= 1.0 {
            return Err(Error::invalid("t-SNE momentum must be below 1"));
        }
        if self.iters == 0 {
            return Err(Error::invalid("t-SNE needs at least one iteration"));
        }
        Ok(())
    }
}

/// Output of a t-SNE run.
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub embedding: Matrix,
    /// `(iteration, KL)` pairs, iteration counted from 1.
    pub kl_history: Vec<(usize, f64)>,
}

/// Joint input probabilities `P` (symmetric, zero diagonal, summing to one).
pub fn joint_probabilities(data: &Matrix, perplexity: f64) -> Result<Matrix> {
    let m = data.rows();
    let d2 = sq_dists_gram(data, data);
    let target = perplexity.ln();
    let mut p = Matrix::zeros(m, m);
    let mut row = vec![0.0; m];
    for i in 0..m {
        let di: Vec<f64> = (0..m).map(|j| if j == i { f64::INFINITY } else { d2[(i, j)].max(0.0) }).collect();
        let dmin = di.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let scale = di.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, &v| a.max(v - dmin));
        if scale > 0.0 {
            beta = 1.0 / scale;
        }
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut wsum = 0.0;
            for j in 0..m {
                if j == i {
                    row[j] = 0.0;
                    continue;
                }
                let e = (-(di[j] - dmin) * beta).exp();
                row[j] = e;
                sum += e;
                wsum += e * (di[j] - dmin);
            }
            let h = sum.ln() + beta * wsum / sum;
            let diff = h - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        let sum: f64 = row.iter().sum();
        for j in 0..m {
            p[(i, j)] = row[j] / sum;
        }
    }
    let mut joint = p.symmetrized();
    joint.scale(1.0 / m as f64);
    Ok(joint)
}

/// Student-t kernel `(1 + |y_i - y_j|^2)^-1` with a zero diagonal, and its sum.
fn student_kernel(y: &Matrix) -> (Matrix, f64) {
    let m = y.rows();
    let mut num = sq_dists_gram(y, y);
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let v = if i == j { 0.0 } else { 1.0 / (1.0 + num[(i, j)].max(0.0)) };
            num[(i, j)] = v;
            total += v;
        }
    }
    (num, total)
}

/// `KL(P || Q)` for the embedding `y`.
pub fn kl_divergence(p: &Matrix, y: &Matrix) -> f64 {
    let (num, total) = student_kernel(y);
    let mut kl = 0.0;
    for (&pij, &nij) in p.as_slice().iter().zip(num.as_slice()) {
        if pij > 0.0 {
            kl += pij * (pij / (nij / total)).ln();
        }
    }
    kl
}

/// Gradient of `KL(P || Q)`:
/// `4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1`.
pub fn kl_gradient(p: &Matrix, y: &Matrix) -> Matrix {
    gradient_scaled(p, y, 1.0)
}

fn gradient_scaled(p: &Matrix, y: &Matrix, exaggeration: f64) -> Matrix {
    let (m, r) = y.shape();
    let (num, total) = student_kernel(y);
    // stiffness S_ij = (e p_ij - q_ij) num_ij; grad = 4 (diag(S 1) - S) Y
    let mut s = Matrix::zeros(m, m);
    let mut rowsum = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let n = num[(i, j)];
            let v = (exaggeration * p[(i, j)] - n / total) * n;
            s[(i, j)] = v;
            rowsum[i] += v;
        }
    }
    let sy = s.matmul(y);
    let mut g = Matrix::zeros(m, r);
    for i in 0..m {
        for c in 0..r {
            g[(i, c)] = 4.0 * (rowsum[i] * y[(i, c)] - sy[(i, c)]);
        }
    }
    g
}

/// Runs t-SNE on the rows of `data`, returning the embedding and KL trace.
pub fn run_tsne(data: &Matrix, r: usize, cfg: &TsneConfig) -> Result<TsneRun> {
    let m = data.rows();
    cfg.validate(m)?;
    if r == 0 {
        return Err(Error::invalid("t-SNE output dimension must be at least 1"));
    }
    if !data.is_finite() {
        return Err(Error::invalid("t-SNE input contains non-finite values"));
    }
    let p = joint_probabilities(data, cfg.perplexity_for(m))?;
    let mut rng = seed::rng(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Matrix::from_vec(m, r, (0..m * r).map(|_| normal.sample(&mut rng)).collect())?;
    let mut update = Matrix::zeros(m, r);
    let mut gains = vec![1.0f64; m * r];
    let mut kl_history = Vec::new();
    for it in 1..=cfg.iters {
        let exag = if it <= cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if it <= cfg.momentum_switch {
            cfg.momentum_initial
        } else {
            cfg.momentum_final
        };
        let g = gradient_scaled(&p, &y, exag);
        for ((gain, u), &gv) in gains.iter_mut().zip(update.as_mut_slice()).zip(g.as_slice()) {
            *gain = if (gv > 0.0) != (*u > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
            *gain = gain.max(0.01f64);
            *u = momentum * *u - cfg.learning_rate * *gain * gv;
        }
        for (v, u) in y.as_mut_slice().iter_mut().zip(update.as_slice()) {
            *v += u;
        }
        let mean = y.column_means();
        y.sub_row_vector(&mean);
        if !y.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                value: f64::NAN,
            });
        }
        if (cfg.kl_every > 0 && it % cfg.kl_every == 0) || it == cfg.iters {
            let kl = kl_divergence(&p, &y);
            if !kl.is_finite() {
                return Err(Error::Diverged { iteration: it, value: kl });
            }
            kl_history.push((it, kl));
        }
    }
    Ok(TsneRun { embedding: y, kl_history })
}

/// t-SNE embedding of the base points.
///
/// Points are processed in lexicographic order of their coordinates, so
/// reordering the base set reorders the embedding rows and nothing else.
pub fn embed_tsne(base: &Matrix, r: usize, cfg: &TsneConfig) -> Result<BaseEmbedding> {
    let m = base.rows();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        base.row(a)
            .iter()
            .zip(base.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let run = run_tsne(&base.select_rows(&order), r, cfg)?;
    let mut values = Matrix::zeros(m, r);
    for (sorted, &orig) in order.iter().enumerate() {
        values.row_mut(orig).copy_from_slice(run.embedding.row(sorted));
    }
    Ok(BaseEmbedding::new(values, Backend::ImhTsne))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(m: usize, d: usize, s: u64) -> Matrix {
        let mut rng = seed::rng(s);
        Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn joint_probabilities_are_a_distribution() {
        let p = joint_probabilities(&random(20, 3, 1), 5.0).unwrap();
        let total: f64 = p.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(p.max_abs_diff(&p.transpose()) == 0.0);
        assert!((0..20).all(|i| p[(i, i)] == 0.0));
    }

    #[test]
    fn conditional_perplexity_hits_target() {
        let data = random(30, 4, 2);
        let joint = joint_probabilities(&data, 7.0).unwrap();
        assert!(joint.is_finite());
        // rebuild one conditional row directly and check its entropy
        let d2 = sq_dists_gram(&data, &data);
        let row: Vec<f64> = (1..30).map(|j| d2[(0, j)]).collect();
        let (mut lo, mut hi) = (1e-6f64, 1e6f64);
        for _ in 0..200 {
            let beta = (lo * hi).sqrt();
            let w: Vec<f64> = row.iter().map(|d| (-d * beta).exp()).collect();
            let s: f64 = w.iter().sum();
            let h: f64 = -w.iter().map(|x| x / s).filter(|&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
            if h > 7.0f64.ln() {
                lo = beta;
            } else {
                hi = beta;
            }
        }
        assert!(hi / lo < 1.0 + 1e-9);
    }

    #[test]
    fn planted_q_gives_zero_kl() {
        let y = random(8, 2, 3);
        let (num, total) = student_kernel(&y);
        let mut p = num.clone();
        p.scale(1.0 / total);
        assert!(kl_divergence(&p, &y).abs() < 1e-14);
        let g = kl_gradient(&p, &y);
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_infeasible_perplexity() {
        let cfg = TsneConfig {
            perplexity: Some(5.0),
            ..TsneConfig::default()
        };
        assert!(run_tsne(&random(10, 2, 0), 2, &cfg).is_err());
        assert!(run_tsne(&random(3, 2, 0), 2, &TsneConfig::default()).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = TsneConfig {
            iters: 50,
            seed: 4,
            ..TsneConfig::default()
        };
        let data = random(16, 3, 5);
        let a = run_tsne(&data, 2, &cfg).unwrap();
        let b = run_tsne(&data, 2, &cfg).unwrap();
        assert_eq!(a.embedding, b.embedding);
    }
}
