//! Multi-right-hand-side nonnegative least squares.
//!
//! `min_{W >= 0} ||X - W H||_F^2` decomposes into one small NNLS per row of
//! `W`: row i minimizes `w (H H^T) w^T - 2 w (H X_i^T)` over `w >= 0`. The
//! rows share the Gram matrix `H H^T` and are solved independently, in
//! order, so results do not depend on any execution schedule.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_ridged, Cholesky};
use crate::matrix::{Dense, Matrix};

/// Solution of a multi-row NNLS solve.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    /// The p x r nonnegative solution.
    pub w: Dense,
    /// Stationarity residual of each row subproblem.
    pub row_kkt: Vec<f64>,
    /// Iterations spent on each row.
    pub row_iters: Vec<usize>,
}

impl NnlsSolution {
    pub fn max_kkt(&self) -> f64 {
        self.row_kkt.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NnlsOptions {
    /// Subproblem stationarity target for active-set termination.
    pub tol: f64,
    /// Relative ridge added to a singular Gram matrix.
    pub ridge_rel: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            tol: 1e-10,
            ridge_rel: 1e-12,
        }
    }
}

/// Exact NNLS by an active-set method with optional warm starting.
///
/// `h` is r x n, `x` is p x n; the result `w` is p x r with
/// `w >= 0` and each row at the optimum of its subproblem.
pub fn nnls_solve(h: &Dense, x: &Matrix, warm_start: Option<&Dense>) -> Result<NnlsSolution> {
    nnls_solve_with(h, x, warm_start, NnlsOptions::default())
}

pub fn nnls_solve_with(
    h: &Dense,
    x: &Matrix,
    warm_start: Option<&Dense>,
    options: NnlsOptions,
) -> Result<NnlsSolution> {
    let r = h.rows();
    let p = x.rows();
    if r == 0 {
        return Err(Error::InvalidRank {
            rank: 0,
            rows: p,
            cols: x.cols(),
        });
    }
    if h.cols() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{} but X has {} columns",
            r,
            h.cols(),
            x.cols()
        )));
    }
    if !h.all_finite() {
        return Err(Error::DimensionMismatch("H has non-finite entries".into()));
    }
    if let Some(w0) = warm_start {
        if w0.rows() != p || w0.cols() != r {
            return Err(Error::DimensionMismatch(format!(
                "warm start is {}x{}, expected {}x{}",
                w0.rows(),
                w0.cols(),
                p,
                r
            )));
        }
        if !w0.all_finite() {
            return Err(Error::DimensionMismatch(
                "warm start has non-finite entries".into(),
            ));
        }
    }

    let mut gram = h.gram_rows();
    if cholesky(&gram).is_err() {
        // singular Gram: ridge it once so every row sees the same system
        let trace: f64 = (0..r).map(|i| gram.get(i, i)).sum();
        let ridge = options.ridge_rel * trace.max(f64::MIN_POSITIVE) / r as f64;
        for i in 0..r {
            gram.set(i, i, gram.get(i, i) + ridge);
        }
    }
    let rhs = x.mul_transb(h); // p x r

    let mut w = Dense::zeros(p, r);
    let mut row_kkt = Vec::with_capacity(p);
    let mut row_iters = Vec::with_capacity(p);
    let mut scratch = RowWorkspace::new(r);
    for i in 0..p {
        let warm_row = warm_start.map(|w0| w0.row(i));
        let (kkt, iters) =
            solve_row_active_set(&gram, rhs.row(i), warm_row, options.tol, &mut scratch);
        w.row_mut(i).copy_from_slice(&scratch.w);
        row_kkt.push(kkt);
        row_iters.push(iters);
    }
    Ok(NnlsSolution {
        w,
        row_kkt,
        row_iters,
    })
}

struct RowWorkspace {
    w: Vec<f64>,
    grad: Vec<f64>,
    passive: Vec<bool>,
}

impl RowWorkspace {
    fn new(r: usize) -> Self {
        RowWorkspace {
            w: vec![0.0; r],
            grad: vec![0.0; r],
            passive: vec![false; r],
        }
    }
}

fn row_stationarity(w: &[f64], grad: &[f64]) -> f64 {
    let mut neg_w = 0.0;
    let mut neg_g = 0.0;
    let mut comp = 0.0;
    for (&wi, &gi) in w.iter().zip(grad) {
        if wi < 0.0 {
            neg_w += wi * wi;
        }
        if gi < 0.0 {
            neg_g += gi * gi;
        }
        comp += (wi * gi) * (wi * gi);
    }
    neg_w.sqrt() + neg_g.sqrt() + comp.sqrt()
}

/// Lawson-Hanson active set on the normal equations `G w = c`, minimizing
/// `1/2 w G w^T - c w` over `w >= 0`. Ties in the entering dual are broken
/// towards the smallest index.
fn solve_row_active_set(
    g: &Dense,
    c: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    ws: &mut RowWorkspace,
) -> (f64, usize) {
    let r = c.len();
    ws.w.fill(0.0);
    ws.passive.fill(false);

    if let Some(start) = warm {
        for i in 0..r {
            if start[i] > 0.0 {
                ws.w[i] = start[i];
                ws.passive[i] = true;
            }
        }
        if ws.passive.iter().any(|&b| b) {
            feasibility_loop(g, c, ws);
        }
    }

    let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let dual_eps = tol * scale;
    let max_rounds = 10 * r + 30;
    let mut rounds = 0;
    loop {
        compute_grad(g, &ws.w, c, &mut ws.grad);
        // most negative free gradient enters; smallest index wins ties
        let mut enter: Option<usize> = None;
        let mut best = -dual_eps;
        for i in 0..r {
            if !ws.passive[i] && ws.grad[i] < best {
                best = ws.grad[i];
                enter = Some(i);
            }
        }
        let Some(enter) = enter else { break };
        if rounds >= max_rounds {
            break;
        }
        rounds += 1;
        ws.passive[enter] = true;
        feasibility_loop(g, c, ws);
    }
    compute_grad(g, &ws.w, c, &mut ws.grad);
    (row_stationarity(&ws.w, &ws.grad), rounds)
}

fn compute_grad(g: &Dense, w: &[f64], c: &[f64], grad: &mut [f64]) {
    let r = c.len();
    for i in 0..r {
        let mut s = -c[i];
        let row = g.row(i);
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                s += row[k] * wk;
            }
        }
        grad[i] = s;
    }
}

/// Solve the equality-constrained subproblem on the passive set and walk the
/// iterate towards it, dropping variables that hit the boundary.
fn feasibility_loop(g: &Dense, c: &[f64], ws: &mut RowWorkspace) {
    let r = c.len();
    loop {
        let idx: Vec<usize> = (0..r).filter(|&i| ws.passive[i]).collect();
        if idx.is_empty() {
            return;
        }
        let z = solve_subset(g, c, &idx);
        if z.iter().all(|&v| v > 0.0) {
            ws.w.fill(0.0);
            for (t, &i) in idx.iter().enumerate() {
                ws.w[i] = z[t];
            }
            return;
        }
        // step length to the first variable that hits zero
        let mut alpha = 1.0f64;
        for (t, &i) in idx.iter().enumerate() {
            if z[t] <= 0.0 {
                let denom = ws.w[i] - z[t];
                let a = if denom > 0.0 { ws.w[i] / denom } else { 0.0 };
                if a < alpha {
                    alpha = a;
                }
            }
        }
        for (t, &i) in idx.iter().enumerate() {
            ws.w[i] += alpha * (z[t] - ws.w[i]);
        }
        let mut dropped = false;
        for (t, &i) in idx.iter().enumerate() {
            if z[t] <= 0.0 && ws.w[i] <= f64::EPSILON * (1.0 + z[t].abs()) {
                ws.w[i] = 0.0;
                ws.passive[i] = false;
                dropped = true;
            }
        }
        if !dropped {
            // roundoff stalemate: drop the most negative z to guarantee progress
            let mut worst = None;
            let mut worst_z = 0.0;
            for (t, &i) in idx.iter().enumerate() {
                if z[t] <= worst_z {
                    worst_z = z[t];
                    worst = Some(i);
                }
            }
            match worst {
                Some(i) => {
                    ws.w[i] = 0.0;
                    ws.passive[i] = false;
                }
                None => return,
            }
        }
    }
}

fn solve_subset(g: &Dense, c: &[f64], idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut sub = Dense::zeros(k, k);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            sub.set(a, b, g.get(i, j));
        }
    }
    let mut b: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
    let chol: Cholesky = match cholesky(&sub) {
        Ok(c) => c,
        Err(_) => cholesky_ridged(&sub, 1e-12).expect("ridged factorization").0,
    };
    chol.solve_in_place(&mut b);
    b
}

/// Projected gradient NNLS with fixed step `1 / trace(H H^T)` (the trace
/// bounds the largest eigenvalue, so the objective never increases).
/// Returns after `max_inner` steps or earlier at stationarity.
pub fn nnls_pg(h: &Dense, x: &Matrix, w0: &Dense, max_inner: usize) -> Result<NnlsSolution> {
    nnls_pg_with(h, x, w0, max_inner, NnlsOptions::default())
}

pub fn nnls_pg_with(
    h: &Dense,
    x: &Matrix,
    w0: &Dense,
    max_inner: usize,
    options: NnlsOptions,
) -> Result<NnlsSolution> {
    let r = h.rows();
    let p = x.rows();
    if r == 0 {
        return Err(Error::InvalidRank {
            rank: 0,
            rows: p,
            cols: x.cols(),
        });
    }
    if w0.rows() != p || w0.cols() != r || h.cols() != x.cols() {
        return Err(Error::DimensionMismatch(
            "nnls_pg: shapes of H, X, W0 do not conform".into(),
        ));
    }

    let gram = h.gram_rows();
    let trace: f64 = (0..r).map(|i| gram.get(i, i)).sum();
    let mut w = w0.clone();
    w.clamp_min(0.0);
    if trace <= 0.0 {
        // H = 0: the objective is constant in W
        let row_kkt = vec![0.0; p];
        return Ok(NnlsSolution {
            w,
            row_kkt,
            row_iters: vec![0; p],
        });
    }
    let step = 1.0 / trace;
    let rhs = x.mul_transb(h);

    let mut row_kkt = vec![0.0; p];
    let mut row_iters = vec![0; p];
    let mut grad = vec![0.0; r];
    for i in 0..p {
        let c = rhs.row(i);
        let wi = w.row_mut(i);
        let mut iters = 0;
        for _ in 0..max_inner {
            compute_grad(&gram, wi, c, &mut grad);
            if row_stationarity(wi, &grad) <= options.tol {
                break;
            }
            iters += 1;
            for k in 0..r {
                wi[k] = (wi[k] - step * grad[k]).max(0.0);
            }
        }
        compute_grad(&gram, wi, c, &mut grad);
        row_kkt[i] = row_stationarity(wi, &grad);
        row_iters[i] = iters;
    }
    Ok(NnlsSolution {
        w,
        row_kkt,
        row_iters,
    })
}
