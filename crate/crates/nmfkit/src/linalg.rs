//! Small dense factorizations backing the solvers and initializers:
//! Cholesky solves for normal equations, one-sided Jacobi SVD, and a
//! randomized truncated SVD by subspace iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{Dense, Matrix};

/// Cholesky factor of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>, // lower triangle, row-major
}

/// Factor a symmetric positive definite matrix. Fails on non-positive pivots.
pub fn cholesky(g: &Dense) -> Result<Cholesky> {
    let n = g.rows();
    assert_eq!(n, g.cols(), "cholesky: matrix must be square");
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "matrix not positive definite (pivot {s:.3e} at {i})"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(Cholesky { n, l })
}

impl Cholesky {
    /// Solve `G x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Factor `g + ridge * I` with `ridge = ridge_rel * trace(g) / n`, falling
/// back to progressively larger ridges if the factorization still fails.
pub fn cholesky_ridged(g: &Dense, ridge_rel: f64) -> Result<(Cholesky, f64)> {
    if let Ok(c) = cholesky(g) {
        return Ok((c, 0.0));
    }
    let n = g.rows();
    let trace: f64 = (0..n).map(|i| g.get(i, i)).sum();
    let base = if trace > 0.0 { trace / n as f64 } else { 1.0 };
    let mut rel = ridge_rel.max(f64::EPSILON);
    for _ in 0..40 {
        let ridge = rel * base;
        let mut gr = g.clone();
        for i in 0..n {
            gr.set(i, i, gr.get(i, i) + ridge);
        }
        if let Ok(c) = cholesky(&gr) {
            return Ok((c, ridge));
        }
        rel *= 10.0;
    }
    Err(Error::InvalidConfig(
        "Gram matrix could not be regularized".into(),
    ))
}

/// Thin singular value decomposition `A = U diag(s) V^T` with
/// `k = min(rows, cols)` factors, singular values sorted non-increasing.
pub struct Svd {
    pub u: Dense,
    pub s: Vec<f64>,
    pub v: Dense,
}

/// One-sided Jacobi SVD. Robust for the small and thin matrices that occur
/// here (factors, projected sketches); cost is O(m n^2) per sweep on an
/// m x n input with m >= n.
pub fn svd_thin(a: &Dense) -> Svd {
    if a.rows() < a.cols() {
        let t = svd_thin(&a.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let m = a.rows();
    let n = a.cols();
    // work on columns: u[.., j] starts as A(:, j)
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col_to_vec(j)).collect();
    let mut v = Dense::identity(n);

    let eps = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        alpha += cols[p][i] * cols[p][i];
                        beta += cols[q][i] * cols[q][i];
                        gamma += cols[p][i] * cols[q][i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma.abs() <= eps * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut u = Dense::zeros(m, n);
    let mut s = vec![0.0; n];
    let mut vo = Dense::zeros(n, n);
    for (t, &j) in order.iter().enumerate() {
        s[t] = norms[j];
        if norms[j] > 0.0 {
            for i in 0..m {
                u.set(i, t, cols[j][i] / norms[j]);
            }
        }
        for i in 0..n {
            vo.set(i, t, v.get(i, j));
        }
    }
    Svd { u, s, v: vo }
}

/// Modified Gram-Schmidt with a re-orthogonalization pass. Columns whose
/// residual collapses below `1e-12` of their original norm are dropped; the
/// returned matrix may therefore have fewer columns than the input.
pub fn orthonormalize_columns(a: &Dense) -> Dense {
    let m = a.rows();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.cols() {
        let mut col = a.col_to_vec(j);
        let orig: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let coef: f64 = b.iter().zip(&col).map(|(x, y)| x * y).sum();
                for (c, x) in col.iter_mut().zip(b) {
                    *c -= coef * x;
                }
            }
        }
        let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 * orig {
            for c in &mut col {
                *c /= norm;
            }
            basis.push(col);
        }
    }
    let mut q = Dense::zeros(m, basis.len());
    for (j, b) in basis.iter().enumerate() {
        q.set_col(j, b);
    }
    q
}

fn gaussian_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dense {
    let mut d = Dense::zeros(rows, cols);
    for v in d.data_mut() {
        *v = rng.sample(StandardNormal);
    }
    d
}

/// Randomized truncated SVD by subspace iteration (2 power iterations,
/// oversampling 8). A fixed internal seed keeps the result deterministic
/// for a given input.
pub fn randomized_svd(x: &Matrix, rank: usize) -> Svd {
    let (p, n) = (x.rows(), x.cols());
    let k = (rank + 8).min(p).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let omega = gaussian_dense(&mut rng, n, k);
    // Y = X * Omega
    let mut q = orthonormalize_columns(&x.mul_transb(&omega.transpose()));
    for _ in 0..2 {
        let z = orthonormalize_columns(&x.premul_transa(&q).transpose()); // X^T Q
        q = orthonormalize_columns(&x.mul_transb(&z.transpose())); // X Z
    }
    let b = x.premul_transa(&q); // k x n
    let svd_b = svd_thin(&b);
    let keep = rank.min(svd_b.s.len());
    let mut u = q.matmul(&svd_b.u);
    truncate_cols(&mut u, keep);
    let mut v = svd_b.v;
    truncate_cols(&mut v, keep);
    Svd {
        u,
        s: svd_b.s[..keep].to_vec(),
        v,
    }
}

fn truncate_cols(m: &mut Dense, k: usize) {
    if m.cols() == k {
        return;
    }
    let mut out = Dense::zeros(m.rows(), k);
    for j in 0..k {
        for i in 0..m.rows() {
            out.set(i, j, m.get(i, j));
        }
    }
    *m = out;
}

/// Leading `rank` singular triplets: exact Jacobi when the input is small,
/// randomized subspace iteration otherwise.
pub fn truncated_svd(x: &Matrix, rank: usize) -> Svd {
    let small = x.rows().min(x.cols()) <= 64;
    if small {
        let mut svd = svd_thin(&x.to_dense());
        let keep = rank.min(svd.s.len());
        truncate_cols(&mut svd.u, keep);
        truncate_cols(&mut svd.v, keep);
        svd.s.truncate(keep);
        svd
    } else {
        randomized_svd(x, rank)
    }
}

/// Ratio of extreme singular values.
pub fn condition_number(a: &Dense) -> f64 {
    let svd = svd_thin(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let smin = svd.s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn reconstruct(svd: &Svd) -> Dense {
        let mut us = svd.u.clone();
        for (j, &s) in svd.s.iter().enumerate() {
            us.scale_col(j, s);
        }
        us.mul_transb(&svd.v)
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let g = Dense::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]).unwrap();
        let c = cholesky(&g).unwrap();
        let mut b = vec![2.0, 1.0];
        c.solve_in_place(&mut b);
        // check G x = [2, 1]
        assert!((4.0 * b[0] + 2.0 * b[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * b[0] + 3.0 * b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_ridged_handles_singular() {
        let g = Dense::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let (c, ridge) = cholesky_ridged(&g, 1e-12).unwrap();
        assert!(ridge > 0.0);
        let mut b = vec![1.0, 1.0];
        c.solve_in_place(&mut b);
        assert!(b.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn svd_identity() {
        let svd = svd_thin(&Dense::identity(3));
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let r = reconstruct(&svd);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((r.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_known_2x2() {
        // A = [[3, 0], [0, -2]] has singular values 3 and 2.
        let a = Dense::from_rows(&[&[3.0, 0.0], &[0.0, -2.0]]).unwrap();
        let svd = svd_thin(&a);
        assert!((svd.s[0] - 3.0).abs() < 1e-12);
        assert!((svd.s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_random_rect() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(m, n) in &[(6usize, 4usize), (4, 7), (5, 5)] {
            let mut a = Dense::zeros(m, n);
            for v in a.data_mut() {
                *v = rng.random::<f64>() * 2.0 - 1.0;
            }
            let svd = svd_thin(&a);
            let r = reconstruct(&svd);
            let mut err = 0.0;
            for (x, y) in a.data().iter().zip(r.data()) {
                err += (x - y) * (x - y);
            }
            assert!(err.sqrt() < 1e-10 * (1.0 + a.frob_norm()));
            // sorted non-increasing
            for w in svd.s.windows(2) {
                assert!(w[0] >= w[1] - 1e-14);
            }
            // orthonormal U
            let utu = svd.u.gram_cols();
            for i in 0..utu.rows() {
                for j in 0..utu.cols() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((utu.get(i, j) - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn orthonormalize_drops_dependent_columns() {
        let a = Dense::from_rows(&[&[1.0, 2.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]).unwrap();
        let q = orthonormalize_columns(&a);
        assert_eq!(q.cols(), 2);
        let qtq = q.gram_cols();
        assert!((qtq.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((qtq.get(1, 1) - 1.0).abs() < 1e-12);
        assert!(qtq.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn randomized_svd_matches_exact_on_lowrank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // 80 x 70 rank-5 matrix
        let mut w = Dense::zeros(80, 5);
        let mut h = Dense::zeros(5, 70);
        for v in w.data_mut() {
            *v = rng.random();
        }
        for v in h.data_mut() {
            *v = rng.random();
        }
        let a = w.matmul(&h);
        let x = Matrix::Dense(a.clone());
        let svd = randomized_svd(&x, 5);
        let r = reconstruct(&svd);
        let mut err = 0.0;
        for (p, q) in a.data().iter().zip(r.data()) {
            err += (p - q) * (p - q);
        }
        assert!(
            err.sqrt() <= 1e-8 * a.frob_norm(),
            "relative error {}",
            err.sqrt() / a.frob_norm()
        );
        let exact = svd_thin(&a);
        for k in 0..5 {
            assert!((svd.s[k] - exact.s[k]).abs() <= 1e-6 * exact.s[0]);
        }
    }
}
