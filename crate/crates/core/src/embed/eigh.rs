//! Dense symmetric eigendecomposition: Householder tridiagonalization
//! followed by implicit QL iterations.

use std::cmp::Ordering;

use crate::{Error, Matrix, Result};

const MAX_QL_ITERS: usize = 60;

/// Full spectrum of a symmetric matrix.
///
/// `values` ascend; column `i` of `vectors` is the unit eigenvector of
/// `values[i]`, with its largest-magnitude entry (first one on ties)
/// positive. Exactly equal eigenvalues are ordered by the lexicographic order
/// of their eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

/// Eigendecomposition of `(A + A') / 2`.
pub fn eigh(a: &Matrix) -> Result<SymmetricEigen> {
    let (n, c) = a.shape();
    if n != c {
        return Err(Error::invalid(format!("eigh needs a square matrix, got {n}x{c}")));
    }
    if !a.is_finite() {
        return Err(Error::invalid("eigh input contains non-finite entries"));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = a.symmetrized().into_vec();
    let mut values = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut values, &mut e, n);
    // rows of `vt` are the eigenvectors being accumulated
    let mut vt = Matrix::from_vec(n, n, v).expect("square").transpose().into_vec();
    tridiagonal_ql(&mut vt, &mut values, &mut e, n)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut v = vt[i * n..(i + 1) * n].to_vec();
            canonical_sign(&mut v);
            (values[i], v)
        })
        .collect();
    pairs.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => lex_cmp(&a.1, &b.1),
        o => o,
    });
    let mut vectors = Matrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        for (i, &x) in v.iter().enumerate() {
            vectors[(i, j)] = x;
        }
    }
    Ok(SymmetricEigen {
        values: pairs.into_iter().map(|p| p.0).collect(),
        vectors,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Householder reduction of the symmetric row-major `v` to tridiagonal form.
/// On return `d` holds the diagonal, `e[1..]` the subdiagonal, and `v` the
/// accumulated orthogonal transform.
fn tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    d.copy_from_slice(&v[at(n - 1, 0)..at(n - 1, 0) + n]);
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for x in &mut d[..i] {
                *x /= scale;
                h += *x * *x;
            }
            let f = d[i - 1];
            let g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on the tridiagonal `(d, e)`. `wt` holds the
/// transform transposed (one basis vector per row) and receives the
/// eigenvectors as rows; `d` receives the eigenvalues.
fn tridiagonal_ql(wt: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::Degenerate("tridiagonal QL iteration did not converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for x in &mut d[l + 2..n] {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = wt.split_at_mut((i + 1) * n);
                    let wi = &mut head[i * n..];
                    let wi1 = &mut tail[..n];
                    for (x, y) in wi.iter_mut().zip(wi1.iter_mut()) {
                        let h = *y;
                        *y = s * *x + c * h;
                        *x = c * *x - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::seed::rng(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    #[test]
    fn identity_spectrum() {
        let e = eigh(&Matrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn diagonal_gives_axis_vectors() {
        let e = eigh(&Matrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_reconstruction() {
        for seed in 0..5 {
            let a = random_symmetric(10, seed);
            let e = eigh(&a).unwrap();
            let lam = Matrix::from_diag(&e.values);
            let back = e.vectors.matmul(&lam).matmul(&e.vectors.transpose());
            assert!(back.max_abs_diff(&a) < 1e-8);
            let vtv = e.vectors.t_matmul(&e.vectors);
            assert!(vtv.max_abs_diff(&Matrix::identity(10)) < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let norm = a.frobenius_norm();
            for i in 0..10 {
                let v = e.vector(i);
                let av = a.matmul(&Matrix::from_vec(10, 1, v.clone()).unwrap());
                let res: f64 = (0..10).map(|k| (av[(k, 0)] - e.values[i] * v[k]).powi(2)).sum::<f64>().sqrt();
                assert!(res <= 1e-8 * norm);
            }
        }
    }

    #[test]
    fn larger_and_repeated_spectra() {
        for (n, seed) in [(60, 1), (7, 2)] {
            let mut a = random_symmetric(n, seed);
            if n == 7 {
                // complete-graph Laplacian: eigenvalue n repeated n - 1 times
                a = Matrix::from_vec(n, n, (0..n * n).map(|k| if k % (n + 1) == 0 { (n - 1) as f64 } else { -1.0 }).collect()).unwrap();
            }
            let e = eigh(&a).unwrap();
            let back = e.vectors.matmul(&Matrix::from_diag(&e.values)).matmul(&e.vectors.transpose());
            assert!(back.max_abs_diff(&a) < 1e-10 * n as f64);
            assert!(e.vectors.t_matmul(&e.vectors).max_abs_diff(&Matrix::identity(n)) < 1e-12 * n as f64);
            if n == 7 {
                assert!(e.values[0].abs() < 1e-12);
                assert!(e.values[1..].iter().all(|&v| (v - 7.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn sign_convention_and_determinism() {
        let a = random_symmetric(12, 42);
        let e1 = eigh(&a).unwrap();
        let e2 = eigh(&a).unwrap();
        assert_eq!(e1, e2);
        for i in 0..12 {
            let v = e1.vector(i);
            let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eigh(&Matrix::zeros(2, 3)).is_err());
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(eigh(&a).is_err());
    }

    #[test]
    fn empty_and_scalar() {
        assert!(eigh(&Matrix::zeros(0, 0)).unwrap().values.is_empty());
        assert_eq!(eigh(&Matrix::from_diag(&[-2.5])).unwrap().values, vec![-2.5]);
    }
}
