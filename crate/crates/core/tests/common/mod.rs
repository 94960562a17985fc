//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::path::PathBuf;

use imh::affinity::{knn_weights, AffinityWeights, Bandwidth};
use imh::base::BaseMethod;
use imh::codes::CodeSet;
use imh::dataset::{load_idx_with_labels, DataMatrix};
use imh::embed::BaseEmbedding;
use imh::embed::tsne::{joint_probabilities, kl_divergence, kl_gradient};
use imh::embed::Backend;
use imh::model::HashModel;
use imh::Matrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(index, weight)` of the `k` nearest rows of `base`, ties to the lower
/// index, weight `exp(-d^2 / sigma^2)`.
pub fn brute_knn(base: &Matrix, x: &[f64], k: usize, sigma: f64) -> Vec<(usize, f64)> {
    let mut d: Vec<(f64, usize)> = (0..base.rows()).map(|j| (sq(base.row(j), x), j)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(dist, j)| (j, (-dist / (sigma * sigma)).exp())).collect()
}

pub struct ExtensionCase {
    pub model: HashModel,
    pub x: Vec<f64>,
    pub neighbours: Vec<(usize, f64)>,
    pub y_b: Matrix,
}

pub fn extension_case(rng: &mut impl Rng) -> ExtensionCase {
    let m = rng.random_range(3..=30);
    let d = rng.random_range(1..=6);
    let r = rng.random_range(1..=8);
    let k = rng.random_range(1..=m);
    let sigma = rng.random_range(0.7..2.5);
    let centers = uniform(rng, m, d, -1.0, 1.0);
    let y_b = uniform(rng, m, r, -2.0, 2.0);
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.2..1.2)).collect();
    let neighbours = brute_knn(&centers, &x, k, sigma);
    let model = HashModel::new(
        centers,
        BaseEmbedding::new(y_b.clone(), Backend::ImhLeBase),
        Bandwidth::fixed(sigma).unwrap(),
        k,
        BaseMethod::Random,
    )
    .unwrap();
    ExtensionCase {
        model,
        x,
        neighbours,
        y_b,
    }
}

/// The extension objective: sum of w_j ||y - y_j||^2 over the neighbours.
pub fn extension_objective(y: &[f64], neighbours: &[(usize, f64)], y_b: &Matrix) -> f64 {
    neighbours.iter().map(|&(j, w)| w * sq(y, y_b.row(j))).sum()
}

/// Its analytic gradient, 2 sum of w_j (y - y_j).
pub fn extension_gradient(y: &[f64], neighbours: &[(usize, f64)], y_b: &Matrix) -> Vec<f64> {
    let mut g = vec![0.0; y.len()];
    for &(j, w) in neighbours {
        for (gi, (a, b)) in g.iter_mut().zip(y.iter().zip(y_b.row(j))) {
            *gi += 2.0 * w * (a - b);
        }
    }
    g
}

/// Newton's method with central-difference gradient and Hessian; uses only
/// evaluations of `f`.
pub fn numerical_minimizer(f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Vec<f64> {
    let n = start.len();
    let mut y = start.to_vec();
    let h = 1e-3;
    for _ in 0..30 {
        let at = |y: &[f64], i: usize, di: f64, j: usize, dj: f64| {
            let mut z = y.to_vec();
            z[i] += di;
            z[j] += dj;
            f(&z)
        };
        let g = DMatrix::from_fn(n, 1, |i, _| (at(&y, i, h, i, 0.0) - at(&y, i, -h, i, 0.0)) / (2.0 * h));
        let hess = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (at(&y, i, h, i, 0.0) - 2.0 * f(&y) + at(&y, i, -h, i, 0.0)) / (h * h)
            } else {
                (at(&y, i, h, j, h) - at(&y, i, h, j, -h) - at(&y, i, -h, j, h) + at(&y, i, -h, j, -h)) / (4.0 * h * h)
            }
        });
        let step = match hess.lu().solve(&g) {
            Some(s) => s,
            None => break,
        };
        let size = step.amax();
        for i in 0..n {
            y[i] -= step[i];
        }
        if size <= 1e-15 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
    y
}

/// Worst gradient norm and worst distance to the numerical minimizer.
pub fn check_extension(case: &ExtensionCase) -> (f64, f64) {
    let y = case.model.extend_point(&case.x).unwrap();
    let grad = extension_gradient(&y, &case.neighbours, &case.y_b);
    let grad_max = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let num = numerical_minimizer(|z| extension_objective(z, &case.neighbours, &case.y_b), &vec![0.0; y.len()]);
    let diff = y.iter().zip(&num).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    (grad_max, diff)
}

pub struct RelaxedCase {
    pub w_b: Matrix,
    pub w_xb: AffinityWeights,
    pub lambda: f64,
    pub r: usize,
}

/// Random base set, training points and bandwidth; `W_B` is built here,
/// independently of the library's affinity code.
pub fn relaxed_case(rng: &mut impl Rng, lambda: Option<f64>) -> RelaxedCase {
    let m = rng.random_range(6..=20);
    let d = rng.random_range(2..=4);
    let n = rng.random_range(20..=60);
    let k = rng.random_range(1..=m.min(5));
    let sigma = rng.random_range(0.6..1.5);
    let base = uniform(rng, m, d, -1.0, 1.0);
    let pts = uniform(rng, n, d, -1.2, 1.2);
    let mut w_b = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                w_b[(i, j)] = (-sq(base.row(i), base.row(j)) / (sigma * sigma)).exp();
            }
        }
    }
    let w_xb = knn_weights(&pts, &base, k, &Bandwidth::fixed(sigma).unwrap()).unwrap();
    RelaxedCase {
        w_b,
        w_xb,
        lambda: lambda.unwrap_or_else(|| rng.random_range(0.0..4.0)),
        r: rng.random_range(1..=m - 2),
    }
}

/// The symmetric part of `M + lambda T` assembled densely from its definition.
pub fn relaxed_operator(c: &RelaxedCase) -> DMatrix<f64> {
    let w_b = to_na(&c.w_b);
    let m = w_b.nrows();
    let w_xb = to_na(&c.w_xb.to_dense());
    let mut wbar = w_xb.clone();
    for mut row in wbar.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
    let d_b = DMatrix::from_diagonal(&w_b.column_sum());
    let d_br = DMatrix::from_diagonal(&w_xb.row_sum().transpose());
    let a = (&d_b - &w_b) + c.lambda * (d_br - wbar.transpose() * &w_xb);
    assert_eq!(a.nrows(), m);
    (&a + a.transpose()) * 0.5
}

/// Minimum of `trace(Y' S Y)` over `Y'Y = mI`, `Y ⟂ 1`: m times the sum of
/// the `r` smallest eigenvalues of S restricted to the complement of 1.
pub fn relaxed_optimum(s: &DMatrix<f64>, r: usize) -> f64 {
    let m = s.nrows();
    let mut basis = DMatrix::<f64>::identity(m, m);
    basis.column_mut(0).fill(1.0);
    let q = basis.qr().q();
    let q = q.columns(1, m - 1).into_owned();
    let restricted = q.transpose() * s * &q;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let mut ev: Vec<f64> = restricted.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    m as f64 * ev[..r].iter().sum::<f64>()
}

pub fn trace_objective(y: &Matrix, s: &DMatrix<f64>) -> f64 {
    let y = to_na(y);
    (y.transpose() * s * &y).trace()
}

/// Largest entry of `|Y'Y - mI|`.
pub fn orthogonality_error(y: &Matrix) -> f64 {
    let y = to_na(y);
    let m = y.nrows() as f64;
    let g = y.transpose() * &y - DMatrix::<f64>::identity(y.ncols(), y.ncols()) * m;
    g.amax()
}

/// Hamming distance by unpacking bits one at a time.
pub fn slow_distance(a: &CodeSet, i: usize, b: &CodeSet, j: usize) -> usize {
    (0..a.r()).filter(|&t| a.bit(i, t) != b.bit(j, t)).count()
}

pub fn random_codes(rng: &mut impl Rng, n: usize, r: usize, first_id: u64) -> CodeSet {
    let bits: Vec<Vec<bool>> = (0..n).map(|_| (0..r).map(|_| rng.random_bool(0.5)).collect()).collect();
    CodeSet::from_bits(r, (first_id..first_id + n as u64).collect(), &bits).unwrap()
}

pub fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

/// The first `n` labelled images of the bundled 10k MNIST file, raw pixels.
pub fn mnist(n: usize) -> Option<DataMatrix> {
    let dir = mnist_dir();
    let data = load_idx_with_labels(
        dir.join("mnist10k-images-idx3-ubyte"),
        dir.join("mnist10k-labels-idx1-ubyte"),
    )
    .ok()?;
    Some(data.head(n))
}

/// Largest entrywise relative error of the analytic KL gradient against
/// central differences.
pub fn tsne_gradient_error(rng: &mut impl Rng) -> f64 {
    let x = uniform(rng, 10, 5, -1.0, 1.0);
    let p = joint_probabilities(&x, 3.0).unwrap();
    let y = Matrix::from_vec(10, 2, (0..20).map(|_| StandardNormal.sample(rng)).collect()).unwrap();
    let g = kl_gradient(&p, &y);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..10 {
        for t in 0..2 {
            let mut plus = y.clone();
            plus[(i, t)] += h;
            let mut minus = y.clone();
            minus[(i, t)] -= h;
            let fd = (kl_divergence(&p, &plus) - kl_divergence(&p, &minus)) / (2.0 * h);
            let a = g[(i, t)];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-12));
        }
    }
    worst
}
