//! Initialization strategies: seeded random, the nonnegative SVD split
//! (NNDSVD-style), k-means clustering, and column subset selection.
//! Every initializer returns nonnegative factors of the requested shape.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::truncated_svd;
use crate::matrix::{Dense, Matrix};
use crate::objective::{optimal_scaling, Factorization};
use crate::separable::{recover_h, spa};

/// Uniform [0, 1) entries from the seeded generator; W is sampled first,
/// then H, both row-major, so the output is deterministic per seed.
pub fn init_random(p: usize, n: usize, r: usize, seed: u64) -> Factorization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Dense::zeros(p, r);
    for v in w.data_mut() {
        *v = rng.random();
    }
    let mut h = Dense::zeros(r, n);
    for v in h.data_mut() {
        *v = rng.random();
    }
    Factorization { w, h }
}

/// Random initialization rescaled by the optimal scalar against the data,
/// split evenly between the two factors.
pub fn init_random_scaled(x: &Matrix, r: usize, seed: u64) -> Result<Factorization> {
    let mut f = init_random(x.rows(), x.cols(), r, seed);
    let alpha = optimal_scaling(x, &f.w, &f.h)?;
    let s = alpha.sqrt();
    f.w.scale(s);
    f.h.scale(s);
    Ok(f)
}

/// Result of the SVD-split initializer, flagging anything that deviated
/// from the plain scheme.
#[derive(Debug, Clone)]
pub struct SvdSplitInit {
    pub factorization: Factorization,
    /// Columns that had to be filled by the random scheme because the
    /// requested rank exceeds the numerical rank.
    pub random_filled: Vec<usize>,
    /// The leading singular vector pair contained negative entries (possible
    /// only for reducible matrices with tied leading singular values).
    pub first_factor_clipped: bool,
}

/// For each leading rank-one SVD factor `s u v^T`, keep the larger-norm
/// nonnegative piece among `[u]_+ [v^T]_+` and `[-u]_+ [-v^T]_+`, scaled to
/// best match the factor. Emitted terms are ordered by non-increasing
/// contribution norm; rank-deficient trailing terms fall back to random.
pub fn init_svd_split(x: &Matrix, r: usize) -> Result<SvdSplitInit> {
    let (p, n) = (x.rows(), x.cols());
    if r == 0 || r > p.min(n) {
        return Err(Error::InvalidRank {
            rank: r,
            rows: p,
            cols: n,
        });
    }
    let svd = truncated_svd(x, r);
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);

    struct Term {
        wcol: Vec<f64>,
        hrow: Vec<f64>,
        contribution: f64,
        random: bool,
    }

    let mut first_factor_clipped = false;
    let mut terms: Vec<Term> = Vec::with_capacity(r);
    for k in 0..r {
        let usable = k < svd.s.len() && svd.s[k] > 1e-12 * sigma_max.max(1e-300);
        if usable {
            let sigma = svd.s[k];
            let u = svd.u.col_to_vec(k);
            let v = svd.v.col_to_vec(k);
            let pos_u: Vec<f64> = u.iter().map(|&a| a.max(0.0)).collect();
            let pos_v: Vec<f64> = v.iter().map(|&a| a.max(0.0)).collect();
            let neg_u: Vec<f64> = u.iter().map(|&a| (-a).max(0.0)).collect();
            let neg_v: Vec<f64> = v.iter().map(|&a| (-a).max(0.0)).collect();
            let norm = |s: &[f64]| s.iter().map(|a| a * a).sum::<f64>().sqrt();
            let pos_norm = norm(&pos_u) * norm(&pos_v);
            let neg_norm = norm(&neg_u) * norm(&neg_v);
            if k == 0 && (norm(&neg_u) > 0.0 && norm(&pos_u) > 0.0) {
                first_factor_clipped = true;
            }
            let (a, b, part_norm) = if pos_norm >= neg_norm {
                (pos_u, pos_v, pos_norm)
            } else {
                (neg_u, neg_v, neg_norm)
            };
            if part_norm > 0.0 {
                // the 1-D least-squares fit of c * a b^T to sigma * u v^T
                // lands exactly at c = sigma; split it across the factors
                let s = sigma.sqrt();
                terms.push(Term {
                    wcol: a.iter().map(|&q| q * s).collect(),
                    hrow: b.iter().map(|&q| q * s).collect(),
                    contribution: sigma * part_norm,
                    random: false,
                });
                continue;
            }
        }
        terms.push(Term {
            wcol: Vec::new(),
            hrow: Vec::new(),
            contribution: 0.0,
            random: true,
        });
    }

    terms.sort_by(|a, b| b.contribution.partial_cmp(&a.contribution).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut w = Dense::zeros(p, r);
    let mut h = Dense::zeros(r, n);
    let mut random_filled = Vec::new();
    for (k, term) in terms.iter().enumerate() {
        if term.random {
            random_filled.push(k);
            for i in 0..p {
                w.set(i, k, rng.random());
            }
            for j in 0..n {
                h.set(k, j, rng.random());
            }
        } else {
            w.set_col(k, &term.wcol);
            for (j, &v) in term.hrow.iter().enumerate() {
                h.set(k, j, v);
            }
        }
    }
    Ok(SvdSplitInit {
        factorization: Factorization { w, h },
        random_filled,
        first_factor_clipped,
    })
}

/// k-means on the data columns (k-means++ seeding, at most 50 Lloyd
/// iterations): W holds the centroids and H is the scaled cluster indicator,
/// one nonzero per column fitted by 1-D least squares.
pub fn init_clustering(x: &Matrix, r: usize, seed: u64) -> Result<Factorization> {
    let (p, n) = (x.rows(), x.cols());
    if r == 0 || n < r {
        return Err(Error::InvalidRank {
            rank: r,
            rows: p,
            cols: n,
        });
    }
    let distinct = count_distinct_columns(x);
    if distinct < r {
        return Err(Error::TooFewDistinctColumns {
            needed: r,
            found: distinct,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col_sq = x.col_norms_sq();
    let mut col = vec![0.0; p];

    // k-means++ seeding
    let mut centroids = Dense::zeros(p, r);
    let first = rng.random_range(0..n);
    x.col_into(first, &mut col);
    centroids.set_col(0, &col);
    let mut d2 = vec![0.0f64; n];
    let mut chosen = 1;
    update_min_dist(x, &centroids, 0, &col_sq, &mut d2, true);
    while chosen < r {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (j, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = j;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        x.col_into(pick, &mut col);
        centroids.set_col(chosen, &col);
        update_min_dist(x, &centroids, chosen, &col_sq, &mut d2, false);
        chosen += 1;
    }

    // Lloyd iterations
    let mut assign = vec![0usize; n];
    for _ in 0..50 {
        let dots = x.premul_transa(&centroids); // r x n
        let cent_sq: Vec<f64> = (0..r).map(|k| centroids.col_norm_sq(k)).collect();
        let mut changed = false;
        for j in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..r {
                let d = col_sq[j] - 2.0 * dots.get(k, j) + cent_sq[k];
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            if assign[j] != best {
                assign[j] = best;
                changed = true;
            }
        }

        let mut sums = Dense::zeros(p, r);
        let mut counts = vec![0usize; r];
        for j in 0..n {
            let k = assign[j];
            counts[k] += 1;
            x.col_into(j, &mut col);
            for i in 0..p {
                sums.set(i, k, sums.get(i, k) + col[i]);
            }
        }
        for k in 0..r {
            if counts[k] == 0 {
                // adopt the column farthest from its centroid as a singleton
                let dots = x.premul_transa(&centroids);
                let cent_sq: Vec<f64> = (0..r).map(|t| centroids.col_norm_sq(t)).collect();
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = col_sq[a] - 2.0 * dots.get(assign[a], a) + cent_sq[assign[a]];
                        let db = col_sq[b] - 2.0 * dots.get(assign[b], b) + cent_sq[assign[b]];
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                x.col_into(far, &mut col);
                sums.set_col(k, &col);
                counts[k] = 1;
                assign[far] = k;
            }
        }
        for k in 0..r {
            let inv = 1.0 / counts[k] as f64;
            for i in 0..p {
                centroids.set(i, k, sums.get(i, k) * inv);
            }
        }
        if !changed {
            break;
        }
    }

    // indicator H with the per-column least-squares scalar
    let dots = x.premul_transa(&centroids);
    let cent_sq: Vec<f64> = (0..r).map(|k| centroids.col_norm_sq(k)).collect();
    let mut h = Dense::zeros(r, n);
    for j in 0..n {
        let k = assign[j];
        if cent_sq[k] > 0.0 {
            h.set(k, j, (dots.get(k, j) / cent_sq[k]).max(0.0));
        }
    }
    Ok(Factorization { w: centroids, h })
}

fn update_min_dist(
    x: &Matrix,
    centroids: &Dense,
    k: usize,
    col_sq: &[f64],
    d2: &mut [f64],
    init: bool,
) {
    let c = centroids.col_to_vec(k);
    let dots = x.premul_vec(&c);
    let c_sq: f64 = c.iter().map(|v| v * v).sum();
    for j in 0..d2.len() {
        let d = (col_sq[j] - 2.0 * dots[j] + c_sq).max(0.0);
        if init || d < d2[j] {
            d2[j] = d;
        }
    }
}

fn count_distinct_columns(x: &Matrix) -> usize {
    let p = x.rows();
    let mut col = vec![0.0; p];
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for j in 0..x.cols() {
        x.col_into(j, &mut col);
        seen.insert(col.iter().map(|v| v.to_bits()).collect());
    }
    seen.len()
}

/// Column subset initialization: anchors picked by SPA (with l1
/// normalization, as for data matrices), `W = X(:,K)`, and `H` the NNLS fit.
pub fn init_colsubset(x: &Matrix, r: usize) -> Result<Factorization> {
    let anchors = spa(x, r, true)?;
    let h = recover_h(x, &anchors.indices)?;
    let p = x.rows();
    let mut w = Dense::zeros(p, r);
    let mut col = vec![0.0; p];
    for (t, &j) in anchors.indices.iter().enumerate() {
        x.col_into(j, &mut col);
        w.set_col(t, &col);
    }
    Ok(Factorization { w, h })
}
