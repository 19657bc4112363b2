//! Objective value, gradients, first-order optimality residual and the
//! scaling/balancing corrections for the Frobenius objective
//! `F(W, H) = 1/2 ||X - W H||_F^2`.

use crate::error::{Error, Result};
use crate::matrix::{check_factor_dims, Dense, Matrix};

/// A nonnegative factor pair `(W, H)` with `W` of shape p x r and `H` of
/// shape r x n.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub w: Dense,
    pub h: Dense,
}

impl Factorization {
    pub fn new(w: Dense, h: Dense) -> Result<Self> {
        if w.cols() != h.rows() {
            return Err(Error::DimensionMismatch(format!(
                "W is {}x{} but H is {}x{}",
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols()
            )));
        }
        for (m, name) in [(&w, "W"), (&h, "H")] {
            if let Some((row, col, value)) = m.find_invalid(true) {
                return if value.is_finite() {
                    Err(Error::NegativeEntry { row, col, value })
                } else {
                    Err(Error::DimensionMismatch(format!(
                        "{name} has a non-finite entry at ({row}, {col})"
                    )))
                };
            }
        }
        Ok(Factorization { w, h })
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn product(&self) -> Dense {
        self.w.matmul(&self.h)
    }
}

/// The three-term stationarity residual, split by factor.
///
/// `c_w = ||min(W,0)||_F + ||min(grad_W,0)||_F + ||W o grad_W||_F` and the
/// analogous `c_h`; the total vanishes exactly at a stationary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub c_w: f64,
    pub c_h: f64,
}

impl KktReport {
    pub fn total(&self) -> f64 {
        self.c_w + self.c_h
    }
}

/// `grad_W F = W (H H^T) - X H^T`. Gram matrices are formed first so the
/// cost is O(pnr + (p + n) r^2).
pub fn gradient_w(x: &Matrix, w: &Dense, h: &Dense) -> Result<Dense> {
    check_factor_dims(x, w, h)?;
    let gram = h.gram_rows();
    let xht = x.mul_transb(h);
    let mut g = w.mul_transb(&gram); // gram is symmetric
    for (gv, xv) in g.data_mut().iter_mut().zip(xht.data()) {
        *gv -= xv;
    }
    Ok(g)
}

/// `grad_H F = (W^T W) H - W^T X`.
pub fn gradient_h(x: &Matrix, w: &Dense, h: &Dense) -> Result<Dense> {
    check_factor_dims(x, w, h)?;
    let gram = w.gram_cols();
    let wtx = x.premul_transa(w);
    let mut g = gram.matmul(h);
    for (gv, xv) in g.data_mut().iter_mut().zip(wtx.data()) {
        *gv -= xv;
    }
    Ok(g)
}

fn neg_part_norm(m: &Dense) -> f64 {
    m.data()
        .iter()
        .map(|&v| if v < 0.0 { v * v } else { 0.0 })
        .sum::<f64>()
        .sqrt()
}

fn hadamard_norm(a: &Dense, b: &Dense) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x * y) * (x * y))
        .sum::<f64>()
        .sqrt()
}

/// Stationarity residual for gradients computed at the same `(X, W, H)`.
///
/// The report is sensitive to the relative scaling of `W` and `H`; callers
/// comparing runs should balance the pair first (see [`balance_factors`]).
pub fn kkt_residual(w: &Dense, h: &Dense, grad_w: &Dense, grad_h: &Dense) -> KktReport {
    KktReport {
        c_w: neg_part_norm(w) + neg_part_norm(grad_w) + hadamard_norm(w, grad_w),
        c_h: neg_part_norm(h) + neg_part_norm(grad_h) + hadamard_norm(h, grad_h),
    }
}

/// `argmin_{a >= 0} ||X - a W H||_F`, computed in Gram form as
/// `<X H^T, W> / <W^T W, H H^T>`.
pub fn optimal_scaling(x: &Matrix, w: &Dense, h: &Dense) -> Result<f64> {
    check_factor_dims(x, w, h)?;
    let den = w.gram_cols().inner(&h.gram_rows());
    if den <= 0.0 {
        return Err(Error::ZeroProduct);
    }
    let num = x.mul_transb(h).inner(w);
    Ok((num / den).max(0.0))
}

/// Rescale each rank-one pair so `||W(:,k)||_2 = ||H(k,:)||_2`, preserving
/// the product exactly. If one side of a pair is zero the other is zeroed
/// too (the term contributes nothing either way).
pub fn balance_factors(w: &Dense, h: &Dense) -> (Dense, Dense) {
    assert_eq!(w.cols(), h.rows(), "balance_factors: rank mismatch");
    let mut bw = w.clone();
    let mut bh = h.clone();
    for k in 0..w.cols() {
        let a = bw.col_norm_sq(k).sqrt();
        let b = bh.row_norm_sq(k).sqrt();
        if a == 0.0 || b == 0.0 {
            bw.scale_col(k, 0.0);
            bh.scale_row(k, 0.0);
        } else {
            let s = (b / a).sqrt();
            bw.scale_col(k, s);
            bh.scale_row(k, 1.0 / s);
        }
    }
    (bw, bh)
}

/// KKT residual evaluated at the balanced pair, reusing already-computed
/// gradients. Balancing is a per-term diagonal rescaling, under which the
/// gradients transform diagonally as well: `grad_W -> grad_W S^-1` and
/// `grad_H -> S grad_H` for `W -> W S`, `H -> S^-1 H`.
pub fn kkt_residual_balanced(
    w: &Dense,
    h: &Dense,
    grad_w: &Dense,
    grad_h: &Dense,
) -> KktReport {
    let mut bw = w.clone();
    let mut bh = h.clone();
    let mut bgw = grad_w.clone();
    let mut bgh = grad_h.clone();
    for k in 0..w.cols() {
        let a = bw.col_norm_sq(k).sqrt();
        let b = bh.row_norm_sq(k).sqrt();
        if a == 0.0 || b == 0.0 {
            bw.scale_col(k, 0.0);
            bh.scale_row(k, 0.0);
            bgw.scale_col(k, 0.0);
            bgh.scale_row(k, 0.0);
        } else {
            let s = (b / a).sqrt();
            bw.scale_col(k, s);
            bh.scale_row(k, 1.0 / s);
            bgw.scale_col(k, 1.0 / s);
            bgh.scale_row(k, s);
        }
    }
    kkt_residual(&bw, &bh, &bgw, &bgh)
}
