//! Near-separable NMF: successive projection extraction, the anchor
//! refinement pass, and anchor-based recovery of the mixing matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns_l1, Dense, Matrix};
use crate::nnls::nnls_solve;

/// Ordered anchor indices with the residual norm observed at each
/// extraction step. Indices refer to the input matrix's original columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub indices: Vec<usize>,
    pub residual_norms: Vec<f64>,
}

const RANK_DEFICIENT_NORM: f64 = 1e-12;

/// First index attaining the maximum (ties break to the smallest index).
fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    (best, best_v)
}

/// Successive projection: extract `r` columns by repeatedly taking the
/// column of maximum residual norm and projecting the data onto the
/// orthogonal complement of the extracted column.
///
/// The residual is never materialized: per-column squared norms are
/// downdated by `(u^T v)^2` after each extraction, where `u` is the unit
/// residual direction of the extracted column (`2pnr + O(pr^2)` work).
/// Argmax ties break towards the smallest index. With `normalize` set the
/// columns are first scaled to unit l1 norm (zero columns dropped);
/// reported indices always refer to the original column numbering.
pub fn spa(x: &Matrix, r: usize, normalize: bool) -> Result<AnchorSet> {
    let (work, back_map): (Matrix, Option<Vec<usize>>) = if normalize {
        let (nx, sel) = normalize_columns_l1(x)?;
        (nx, Some(sel.kept))
    } else {
        (x.clone(), None)
    };
    if r > work.rows().min(work.cols()) {
        return Err(Error::InvalidRank {
            rank: r,
            rows: work.rows(),
            cols: work.cols(),
        });
    }

    let mut sq = work.col_norms_sq();
    let p = work.rows();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut indices = Vec::with_capacity(r);
    let mut residual_norms = Vec::with_capacity(r);
    let mut col = vec![0.0; p];

    for step in 0..r {
        let (best, best_sq) = argmax_first(&sq);
        if best_sq.sqrt() < RANK_DEFICIENT_NORM {
            return Err(Error::RankDeficient {
                extracted: step,
                requested: r,
            });
        }

        // residual of the chosen column against the extracted directions
        work.col_into(best, &mut col);
        for u in &dirs {
            let coef: f64 = u.iter().zip(&col).map(|(a, b)| a * b).sum();
            for (c, &uv) in col.iter_mut().zip(u) {
                *c -= coef * uv;
            }
        }
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < RANK_DEFICIENT_NORM {
            return Err(Error::RankDeficient {
                extracted: step,
                requested: r,
            });
        }
        for c in &mut col {
            *c /= norm;
        }

        let projections = work.premul_vec(&col); // u^T X
        for (s, &proj) in sq.iter_mut().zip(&projections) {
            *s = (*s - proj * proj).max(0.0);
        }

        indices.push(match &back_map {
            Some(map) => map[best],
            None => best,
        });
        residual_norms.push(best_sq.sqrt());
        dirs.push(col.clone());
    }

    Ok(AnchorSet {
        indices,
        residual_norms,
    })
}

/// One refinement pass over an extracted index set: for each position,
/// project the data onto the orthogonal complement of the other anchors and
/// replace the index with the column of maximum residual norm. If the pass
/// would worsen the NNLS reconstruction residual, the input set is returned
/// unchanged.
pub fn spa_refine(x: &Matrix, anchors: &AnchorSet) -> Result<AnchorSet> {
    let r = anchors.indices.len();
    let p = x.rows();
    let mut work = anchors.indices.clone();
    let mut norms = anchors.residual_norms.clone();
    let mut col = vec![0.0; p];

    for pos in 0..r {
        let mut others = Dense::zeros(p, r.saturating_sub(1));
        let mut t = 0;
        for (k, &j) in work.iter().enumerate() {
            if k == pos {
                continue;
            }
            x.col_into(j, &mut col);
            others.set_col(t, &col);
            t += 1;
        }
        let q = crate::linalg::orthonormalize_columns(&others);
        let mut sq = x.col_norms_sq();
        for b in 0..q.cols() {
            let u = q.col_to_vec(b);
            let projections = x.premul_vec(&u);
            for (s, &proj) in sq.iter_mut().zip(&projections) {
                *s = (*s - proj * proj).max(0.0);
            }
        }
        let (best, best_sq) = argmax_first(&sq);
        work[pos] = best;
        norms[pos] = best_sq.sqrt();
    }

    let refined = AnchorSet {
        indices: work,
        residual_norms: norms,
    };
    // never hand back a set that reconstructs the data worse than the input
    let before = reconstruction_residual(x, &anchors.indices)?;
    let after = reconstruction_residual(x, &refined.indices)?;
    if after <= before {
        Ok(refined)
    } else {
        Ok(anchors.clone())
    }
}

/// `||X - X(:,K) H||_F` with `H` the NNLS fit against the anchor dictionary.
pub fn reconstruction_residual(x: &Matrix, indices: &[usize]) -> Result<f64> {
    let h = recover_h(x, indices)?;
    let w = columns_dense(x, indices);
    crate::matrix::frobenius_error(x, &w, &h)
}

fn columns_dense(x: &Matrix, indices: &[usize]) -> Dense {
    let p = x.rows();
    let mut w = Dense::zeros(p, indices.len());
    let mut col = vec![0.0; p];
    for (t, &j) in indices.iter().enumerate() {
        x.col_into(j, &mut col);
        w.set_col(t, &col);
    }
    w
}

/// Recover the mixing matrix for a fixed anchor set:
/// `H = argmin_{H >= 0} ||X - X(:,K) H||_F`, solved one column at a time by
/// the exact NNLS. For l1-normalized separable data the columns of `H` sum
/// to one.
pub fn recover_h(x: &Matrix, indices: &[usize]) -> Result<Dense> {
    let r = indices.len();
    if r == 0 {
        return Err(Error::InvalidRank {
            rank: 0,
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for &j in indices {
        if j >= x.cols() || !seen.insert(j) {
            return Err(Error::DimensionMismatch(format!(
                "anchor indices must be distinct and within 0..{}",
                x.cols()
            )));
        }
    }
    let w = columns_dense(x, indices);
    // min_H ||X - W H|| == min_{H^T} ||X^T - H^T W^T||, a row NNLS in H^T
    let sol = nnls_solve(&w.transpose(), &x.transposed(), None)?;
    Ok(sol.w.transpose())
}

/// One row of a noise-robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub seed: u64,
    pub max_anchor_error: f64,
}

/// For each noise level and seed, plant `X = W [I, H'] P + N` with
/// per-column noise of l2 norm exactly `epsilon`, run SPA, and record the
/// worst-case distance from a true anchor column to the extracted set.
///
/// Requires `W` of full column rank and the columns of `hprime` to have l1
/// sum at most one.
pub fn spa_noise_sweep(
    w: &Dense,
    hprime: &Dense,
    epsilons: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>> {
    let r = w.cols();
    if hprime.rows() != r {
        return Err(Error::DimensionMismatch(format!(
            "W has rank {} but H' has {} rows",
            r,
            hprime.rows()
        )));
    }
    for j in 0..hprime.cols() {
        let sum: f64 = (0..r).map(|k| hprime.get(k, j).abs()).sum();
        if sum > 1.0 + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "column {j} of H' has l1 sum {sum} > 1"
            )));
        }
    }

    let mut out = Vec::with_capacity(epsilons.len() * seeds.len());
    for &eps in epsilons {
        for &seed in seeds {
            let planted = plant_instance(w, hprime, eps, seed);
            let anchors = spa(&planted, r, false)?;
            let extracted = columns_dense(&planted, &anchors.indices);
            let mut worst = 0.0f64;
            for k in 0..r {
                let mut best = f64::INFINITY;
                for e in 0..r {
                    let mut d = 0.0;
                    for i in 0..w.rows() {
                        let diff = extracted.get(i, e) - w.get(i, k);
                        d += diff * diff;
                    }
                    best = best.min(d.sqrt());
                }
                worst = worst.max(best);
            }
            out.push(SweepPoint {
                epsilon: eps,
                seed,
                max_anchor_error: worst,
            });
        }
    }
    Ok(out)
}

fn plant_instance(w: &Dense, hprime: &Dense, eps: f64, seed: u64) -> Matrix {
    let p = w.rows();
    let r = w.cols();
    let n = r + hprime.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }

    let mut x = Dense::zeros(p, n);
    let mut col = vec![0.0; p];
    for src in 0..n {
        let dst = perm[src];
        if src < r {
            for (i, c) in col.iter_mut().enumerate() {
                *c = w.get(i, src);
            }
        } else {
            for (i, c) in col.iter_mut().enumerate() {
                let mut v = 0.0;
                for k in 0..r {
                    v += w.get(i, k) * hprime.get(k, src - r);
                }
                *c = v;
            }
        }
        if eps > 0.0 {
            let noise: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let norm: f64 = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (c, nv) in col.iter_mut().zip(&noise) {
                    *c += eps * nv / norm;
                }
            }
        }
        x.set_col(dst, &col);
    }
    Matrix::Dense(x)
}
