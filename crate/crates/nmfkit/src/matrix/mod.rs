//! Storage, I/O and the linear-algebra kernels the solvers consume.
//!
//! Data matrices are either dense row-major or sparse column-compressed;
//! the sparse layout matches how every kernel walks the data (by column).

mod dense;
pub mod market;
mod sparse;

pub use dense::Dense;
pub use sparse::Csc;

use crate::error::{Error, Result};

/// A real data matrix, dense or sparse.
///
/// All stored values are finite. Nonnegativity is required only at the points
/// where a matrix is ingested as NMF data (see [`Matrix::require_nonnegative`]).
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(Dense),
    Sparse(Csc),
}

impl Matrix {
    /// Wrap dense storage, verifying all values are finite.
    pub fn dense(d: Dense) -> Result<Self> {
        if let Some((row, col, _)) = d.find_invalid(false) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Matrix::Dense(d))
    }

    /// Wrap sparse storage, verifying all values are finite.
    pub fn sparse(s: Csc) -> Result<Self> {
        if let Some((row, col, _)) = s.find_invalid(false) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Matrix::Sparse(s))
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.rows(),
            Matrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.cols(),
            Matrix::Sparse(s) => s.cols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(d) => d.get(i, j),
            Matrix::Sparse(s) => s.get(i, j),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Matrix::Dense(d) => d.min_value(),
            Matrix::Sparse(s) => s.min_value(),
        }
    }

    /// Error out if any entry is negative.
    pub fn require_nonnegative(&self) -> Result<()> {
        let bad = match self {
            Matrix::Dense(d) => d.find_invalid(true),
            Matrix::Sparse(s) => s.find_invalid(true),
        };
        match bad {
            Some((row, col, value)) => Err(Error::NegativeEntry { row, col, value }),
            None => Ok(()),
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        match self {
            Matrix::Dense(d) => d.frob_norm_sq(),
            Matrix::Sparse(s) => s.frob_norm_sq(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn to_dense(&self) -> Dense {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    /// Transposed copy, preserving the storage kind.
    pub fn transposed(&self) -> Matrix {
        match self {
            Matrix::Dense(d) => Matrix::Dense(d.transpose()),
            Matrix::Sparse(s) => Matrix::Sparse(s.transposed()),
        }
    }

    /// `self * b^T` for a dense `b` (k x n); result is p x k.
    ///
    /// This is the `X H^T` product at the heart of every update rule; for
    /// sparse storage it costs O(nnz * k).
    pub fn mul_transb(&self, b: &Dense) -> Dense {
        assert_eq!(self.cols(), b.cols(), "mul_transb: inner dimensions differ");
        match self {
            Matrix::Dense(d) => d.mul_transb(b),
            Matrix::Sparse(s) => {
                let k = b.rows();
                let mut out = Dense::zeros(s.rows(), k);
                for j in 0..s.cols() {
                    let (ri, vs) = s.col(j);
                    for (&i, &v) in ri.iter().zip(vs) {
                        let out_row = out.row_mut(i);
                        for (t, o) in out_row.iter_mut().enumerate() {
                            *o += v * b.get(t, j);
                        }
                    }
                }
                out
            }
        }
    }

    /// `a^T * self` for a dense `a` (p x k); result is k x n.
    pub fn premul_transa(&self, a: &Dense) -> Dense {
        assert_eq!(
            self.rows(),
            a.rows(),
            "premul_transa: inner dimensions differ"
        );
        match self {
            Matrix::Dense(d) => a.tr_mul(d),
            Matrix::Sparse(s) => {
                let k = a.cols();
                let n = s.cols();
                let mut out = Dense::zeros(k, n);
                for j in 0..n {
                    let (ri, vs) = s.col(j);
                    for (&i, &v) in ri.iter().zip(vs) {
                        let a_row = a.row(i);
                        for (t, &av) in a_row.iter().enumerate() {
                            out.data_mut()[t * n + j] += v * av;
                        }
                    }
                }
                out
            }
        }
    }

    /// `u^T * self` for a dense vector `u` of length `rows`; result length `cols`.
    pub fn premul_vec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows());
        match self {
            Matrix::Dense(d) => {
                let mut out = vec![0.0; d.cols()];
                for i in 0..d.rows() {
                    let ui = u[i];
                    if ui == 0.0 {
                        continue;
                    }
                    for (o, &x) in out.iter_mut().zip(d.row(i)) {
                        *o += ui * x;
                    }
                }
                out
            }
            Matrix::Sparse(s) => (0..s.cols())
                .map(|j| {
                    let (ri, vs) = s.col(j);
                    ri.iter().zip(vs).map(|(&i, &v)| u[i] * v).sum()
                })
                .collect(),
        }
    }

    /// Copy column `j` into `out` (length `rows`).
    pub fn col_into(&self, j: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.rows());
        match self {
            Matrix::Dense(d) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = d.get(i, j);
                }
            }
            Matrix::Sparse(s) => {
                out.fill(0.0);
                let (ri, vs) = s.col(j);
                for (&i, &v) in ri.iter().zip(vs) {
                    out[i] = v;
                }
            }
        }
    }

    /// Squared Euclidean norm of every column.
    pub fn col_norms_sq(&self) -> Vec<f64> {
        match self {
            Matrix::Dense(d) => {
                let mut out = vec![0.0; d.cols()];
                for i in 0..d.rows() {
                    for (o, &x) in out.iter_mut().zip(d.row(i)) {
                        *o += x * x;
                    }
                }
                out
            }
            Matrix::Sparse(s) => (0..s.cols())
                .map(|j| s.col(j).1.iter().map(|v| v * v).sum())
                .collect(),
        }
    }

    /// l1 norm of every column.
    pub fn col_norms_l1(&self) -> Vec<f64> {
        match self {
            Matrix::Dense(d) => {
                let mut out = vec![0.0; d.cols()];
                for i in 0..d.rows() {
                    for (o, &x) in out.iter_mut().zip(d.row(i)) {
                        *o += x.abs();
                    }
                }
                out
            }
            Matrix::Sparse(s) => (0..s.cols())
                .map(|j| s.col(j).1.iter().map(|v| v.abs()).sum())
                .collect(),
        }
    }

    /// Frobenius inner product `<self, W H>` without materializing `W H`.
    ///
    /// Sparse cost is O(nnz * r).
    pub fn inner_with_product(&self, w: &Dense, h: &Dense) -> f64 {
        assert_eq!(self.rows(), w.rows());
        assert_eq!(self.cols(), h.cols());
        assert_eq!(w.cols(), h.rows());
        match self {
            Matrix::Dense(d) => {
                let mut acc = 0.0;
                let r = w.cols();
                for i in 0..d.rows() {
                    let wi = w.row(i);
                    for j in 0..d.cols() {
                        let x = d.get(i, j);
                        if x == 0.0 {
                            continue;
                        }
                        let mut wh = 0.0;
                        for k in 0..r {
                            wh += wi[k] * h.get(k, j);
                        }
                        acc += x * wh;
                    }
                }
                acc
            }
            Matrix::Sparse(s) => {
                let r = w.cols();
                let mut acc = 0.0;
                for j in 0..s.cols() {
                    let (ri, vs) = s.col(j);
                    for (&i, &v) in ri.iter().zip(vs) {
                        let wi = w.row(i);
                        let mut wh = 0.0;
                        for k in 0..r {
                            wh += wi[k] * h.get(k, j);
                        }
                        acc += v * wh;
                    }
                }
                acc
            }
        }
    }

    /// Keep the listed columns, scaling column `keep[t]` by `scale[t]`.
    pub fn select_scale_columns(&self, keep: &[usize], scale: &[f64]) -> Matrix {
        assert_eq!(keep.len(), scale.len());
        match self {
            Matrix::Dense(d) => {
                let mut out = Dense::zeros(d.rows(), keep.len());
                for (t, (&j, &s)) in keep.iter().zip(scale).enumerate() {
                    for i in 0..d.rows() {
                        out.set(i, t, d.get(i, j) * s);
                    }
                }
                Matrix::Dense(out)
            }
            Matrix::Sparse(sp) => {
                let mut triplets = Vec::new();
                for (t, (&j, &s)) in keep.iter().zip(scale).enumerate() {
                    let (ri, vs) = sp.col(j);
                    for (&i, &v) in ri.iter().zip(vs) {
                        triplets.push((i, t, v * s));
                    }
                }
                Matrix::Sparse(
                    Csc::from_triplets(sp.rows(), keep.len(), triplets)
                        .expect("selected indices are in range"),
                )
            }
        }
    }
}

/// Record of which columns survived a normalization pass and how each kept
/// column was scaled. Indices refer to the original matrix and are strictly
/// increasing; scale factors are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSelection {
    pub kept: Vec<usize>,
    pub scale: Vec<f64>,
}

impl ColumnSelection {
    /// Original index of output column `t`.
    pub fn original_index(&self, t: usize) -> usize {
        self.kept[t]
    }
}

/// Scale every column of a nonnegative matrix to unit l1 norm, discarding
/// zero columns. The returned selection maps output columns back to the
/// original index space and records the applied scale factors.
///
/// Columns with tiny but nonzero norm are normalized as-is; amplifying
/// near-zero columns can magnify their noise, which is left to the caller
/// to judge.
pub fn normalize_columns_l1(x: &Matrix) -> Result<(Matrix, ColumnSelection)> {
    x.require_nonnegative()?;
    let norms = x.col_norms_l1();
    let mut kept = Vec::new();
    let mut scale = Vec::new();
    for (j, &nj) in norms.iter().enumerate() {
        if nj > 0.0 {
            kept.push(j);
            scale.push(1.0 / nj);
        }
    }
    if kept.is_empty() {
        return Err(Error::AllColumnsZero);
    }
    let normalized = x.select_scale_columns(&kept, &scale);
    Ok((normalized, ColumnSelection { kept, scale }))
}

/// `||X - W H||_F`.
///
/// Dense input accumulates the residual row by row. Sparse input avoids
/// materializing the residual via
/// `||X||_F^2 - 2 <X, WH> + <W^T W, H H^T>`, clamped at zero before the
/// square root to absorb roundoff.
pub fn frobenius_error(x: &Matrix, w: &Dense, h: &Dense) -> Result<f64> {
    check_factor_dims(x, w, h)?;
    match x {
        Matrix::Dense(d) => Ok(dense_residual_norm(d, w, h)),
        Matrix::Sparse(_) => {
            let sq = x.frob_norm_sq() - 2.0 * x.inner_with_product(w, h)
                + w.gram_cols().inner(&h.gram_rows());
            Ok(sq.max(0.0).sqrt())
        }
    }
}

/// `||X - W H||_F` for dense X, accumulating the residual row by row
/// without materializing `W H`.
pub(crate) fn dense_residual_norm(d: &Dense, w: &Dense, h: &Dense) -> f64 {
    let r = w.cols();
    let n = d.cols();
    let mut acc = 0.0;
    let mut wh_row = vec![0.0; n];
    for i in 0..d.rows() {
        wh_row.fill(0.0);
        let wi = w.row(i);
        for k in 0..r {
            let wik = wi[k];
            if wik == 0.0 {
                continue;
            }
            for (o, &hv) in wh_row.iter_mut().zip(h.row(k)) {
                *o += wik * hv;
            }
        }
        for (j, &wh) in wh_row.iter().enumerate() {
            let e = d.get(i, j) - wh;
            acc += e * e;
        }
    }
    acc.sqrt()
}

pub(crate) fn check_factor_dims(x: &Matrix, w: &Dense, h: &Dense) -> Result<()> {
    if w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, W is {}x{}, H is {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            h.rows(),
            h.cols()
        )));
    }
    Ok(())
}
