//! Two-block coordinate descent for `min ||X - W H||_F^2, W >= 0, H >= 0`
//! with the four classical update rules (MU, ALS, ANLS, HALS).
//!
//! Both factors share one update routine: the H half-step applies the W
//! update to the transposed problem, using `||X - WH||_F = ||X^T - H^T W^T||_F`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_ridged;
use crate::matrix::{Dense, Matrix};
use crate::nnls::{nnls_solve_with, NnlsOptions};
use crate::objective::{kkt_residual_balanced, optimal_scaling, Factorization};

/// Which update rule the framework applies to each factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    Mu,
    Als,
    Anls,
    Hals,
}

impl UpdateRule {
    pub const ALL: [UpdateRule; 4] = [
        UpdateRule::Mu,
        UpdateRule::Als,
        UpdateRule::Anls,
        UpdateRule::Hals,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UpdateRule::Mu => "mu",
            UpdateRule::Als => "als",
            UpdateRule::Anls => "anls",
            UpdateRule::Hals => "hals",
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mu" => Ok(UpdateRule::Mu),
            "als" => Ok(UpdateRule::Als),
            "anls" => Ok(UpdateRule::Anls),
            "hals" => Ok(UpdateRule::Hals),
            other => Err(Error::UnknownAlgorithm(other.into())),
        }
    }
}

/// Solver configuration. Stopping is the OR of the wall-clock budget, the
/// outer iteration cap, stagnation of the relative error over 10 iterations,
/// and the balanced KKT residual falling below `tol_kkt` (tolerances of zero
/// disable the corresponding trigger).
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub rule: UpdateRule,
    pub max_outer: usize,
    pub max_time_s: f64,
    pub tol_kkt: f64,
    pub tol_err_change: f64,
    /// Inner repetitions of the factor update per half-step; the Gram
    /// products are computed once per sweep.
    pub inner_reps: usize,
    pub eps_floor: f64,
    pub seed: u64,
    /// Reinitialize zero MU entries with negative partial derivative.
    pub mu_zero_reinit: bool,
    pub nnls_tol: f64,
}

impl SolverConfig {
    pub fn new(rule: UpdateRule) -> Self {
        SolverConfig {
            rule,
            max_outer: 500,
            max_time_s: f64::INFINITY,
            tol_kkt: 0.0,
            tol_err_change: 0.0,
            inner_reps: 1,
            eps_floor: 1e-16,
            seed: 0,
            mu_zero_reinit: true,
            nnls_tol: 1e-10,
        }
    }

    pub fn max_outer(mut self, n: usize) -> Self {
        self.max_outer = n;
        self
    }

    pub fn max_time_s(mut self, s: f64) -> Self {
        self.max_time_s = s;
        self
    }

    pub fn tol_kkt(mut self, t: f64) -> Self {
        self.tol_kkt = t;
        self
    }

    pub fn tol_err_change(mut self, t: f64) -> Self {
        self.tol_err_change = t;
        self
    }

    pub fn inner_reps(mut self, n: usize) -> Self {
        self.inner_reps = n;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn mu_zero_reinit(mut self, on: bool) -> Self {
        self.mu_zero_reinit = on;
        self
    }

    // negated comparisons so NaN budgets fail validation too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
        }
        if !(self.max_time_s > 0.0) {
            return Err(Error::InvalidConfig("max_time_s must be positive".into()));
        }
        if !(self.eps_floor > 0.0) {
            return Err(Error::InvalidConfig("eps_floor must be positive".into()));
        }
        if self.inner_reps == 0 {
            return Err(Error::InvalidConfig("inner_reps must be at least 1".into()));
        }
        if self.tol_kkt < 0.0 || self.tol_err_change < 0.0 || !(self.nnls_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One trace entry per outer iteration (entry 0 describes the initial pair).
/// `elapsed_s` counts accumulated update time; evaluating the error and the
/// KKT residual for the trace itself is left off the clock so that
/// equal-budget comparisons measure algorithm work only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub elapsed_s: f64,
    pub rel_error: f64,
    pub kkt_total: f64,
}

pub type Trace = Vec<TracePoint>;

/// The products every update rule consumes: `H H^T` and `X H^T`.
pub struct SubproblemData {
    pub gram: Dense,
    pub xht: Dense,
}

static PRECOMPUTE_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of Gram/product precomputations performed so far (diagnostic;
/// lets tests assert that an accelerated sweep shares one precomputation).
pub fn subproblem_precompute_count() -> u64 {
    PRECOMPUTE_COUNT.load(Ordering::Relaxed)
}

/// Compute `H H^T` and `X H^T` once for a sweep of W updates.
pub fn precompute_subproblem(x: &Matrix, h: &Dense) -> SubproblemData {
    PRECOMPUTE_COUNT.fetch_add(1, Ordering::Relaxed);
    SubproblemData {
        gram: h.gram_rows(),
        xht: x.mul_transb(h),
    }
}

/// Options for the multiplicative update.
#[derive(Debug, Clone, Copy)]
pub struct MuOptions {
    pub eps_floor: f64,
    /// Apply the zero-entry fix: entries at zero whose partial derivative is
    /// negative are reinitialized to `eps_floor` before the multiplicative
    /// step, so they are not locked at zero.
    pub zero_reinit: bool,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions {
            eps_floor: 1e-16,
            zero_reinit: true,
        }
    }
}

fn mu_step(data: &SubproblemData, w: &Dense, opts: &MuOptions) -> Dense {
    let (p, r) = (w.rows(), w.cols());
    let mut denom = w.mul_transb(&data.gram); // gram is symmetric
    let mut w_fixed = w.clone();
    if opts.zero_reinit {
        let mut reinits = Vec::new();
        for i in 0..p {
            for k in 0..r {
                if w.get(i, k) == 0.0 && denom.get(i, k) - data.xht.get(i, k) < 0.0 {
                    reinits.push((i, k));
                }
            }
        }
        // the multiplicative step must see the reinitialized W, including in
        // its denominator W (H H^T)
        for &(i, k) in &reinits {
            w_fixed.set(i, k, opts.eps_floor);
            for t in 0..r {
                denom.set(i, t, denom.get(i, t) + opts.eps_floor * data.gram.get(k, t));
            }
        }
    }
    let mut out = w_fixed;
    for i in 0..p {
        for k in 0..r {
            let d = denom.get(i, k).max(opts.eps_floor);
            out.set(i, k, out.get(i, k) * data.xht.get(i, k) / d);
        }
    }
    out
}

/// One multiplicative update of W: `W <- W o [X H^T] / [W H H^T]` with the
/// denominator floored at `eps_floor` and the zero-entry fix per `opts`.
pub fn mu_update(x: &Matrix, h: &Dense, w: &Dense, opts: &MuOptions) -> Dense {
    let data = precompute_subproblem(x, h);
    mu_step(&data, w, opts)
}

/// Projected alternating-least-squares update of W:
/// `W <- max(0, argmin_Z ||X - Z H||_F)`. The Gram matrix is ridged if
/// singular. Rescaling the pair by the optimal scalar happens in the
/// framework after the full round, not here.
pub fn als_update(x: &Matrix, h: &Dense) -> Result<Dense> {
    let data = precompute_subproblem(x, h);
    als_step(&data)
}

fn als_step(data: &SubproblemData) -> Result<Dense> {
    let (chol, _ridge) = cholesky_ridged(&data.gram, 1e-12)?;
    let mut w = data.xht.clone();
    let r = data.gram.rows();
    let mut buf = vec![0.0; r];
    for i in 0..w.rows() {
        buf.copy_from_slice(w.row(i));
        chol.solve_in_place(&mut buf);
        w.row_mut(i).copy_from_slice(&buf);
    }
    w.clamp_min(0.0);
    Ok(w)
}

/// Exact NNLS update of W (the ANLS half-step).
pub fn anls_update(x: &Matrix, h: &Dense, warm: Option<&Dense>, tol: f64) -> Result<Dense> {
    let sol = nnls_solve_with(
        h,
        x,
        warm,
        NnlsOptions {
            tol,
            ..NnlsOptions::default()
        },
    )?;
    Ok(sol.w)
}

/// One HALS sweep over the columns of W in ascending order. Columns whose
/// matching H row has squared norm below `eps_floor` are skipped and their
/// indices returned.
pub fn hals_update(x: &Matrix, w: &Dense, h: &Dense, eps_floor: f64) -> (Dense, Vec<usize>) {
    let data = precompute_subproblem(x, h);
    let mut out = w.clone();
    let skipped = hals_step(&data, &mut out, eps_floor);
    (out, skipped)
}

fn hals_step(data: &SubproblemData, w: &mut Dense, eps_floor: f64) -> Vec<usize> {
    let (p, r) = (w.rows(), w.cols());
    let mut skipped = Vec::new();
    for l in 0..r {
        let gll = data.gram.get(l, l);
        if gll < eps_floor {
            skipped.push(l);
            continue;
        }
        for i in 0..p {
            let row = w.row(i);
            let mut v = data.xht.get(i, l);
            for (k, &wk) in row.iter().enumerate() {
                v -= wk * data.gram.get(k, l);
            }
            v += row[l] * gll;
            w.set(i, l, (v / gll).max(0.0));
        }
    }
    skipped
}

/// Apply `inner` repetitions of the MU or HALS update of W, computing
/// `H H^T` and `X H^T` once. Identical to `inner` separate update calls.
pub fn accelerated_sweep(
    x: &Matrix,
    h: &Dense,
    w: &Dense,
    rule: UpdateRule,
    inner: usize,
    opts: &MuOptions,
) -> Result<Dense> {
    if inner == 0 {
        return Err(Error::InvalidConfig("inner must be at least 1".into()));
    }
    let data = precompute_subproblem(x, h);
    let mut out = w.clone();
    match rule {
        UpdateRule::Mu => {
            for _ in 0..inner {
                out = mu_step(&data, &out, opts);
            }
        }
        UpdateRule::Hals => {
            for _ in 0..inner {
                hals_step(&data, &mut out, opts.eps_floor);
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "accelerated sweep supports mu and hals, not {other}"
            )))
        }
    }
    Ok(out)
}

/// Alternate the configured update over W and H until a stop trigger fires.
///
/// The same routine is used for both factors: the H half-step runs the W
/// update on the transposed problem. For ALS the pair is rescaled by the
/// optimal scalar after each full round, so the trace reports the error
/// after scaling; for HALS the initial pair is rescaled the same way once.
pub fn run_cd(
    x: &Matrix,
    rank: usize,
    config: &SolverConfig,
    init: &Factorization,
) -> Result<(Factorization, Trace)> {
    config.validate()?;
    x.require_nonnegative()?;
    let (p, n) = (x.rows(), x.cols());
    let norm_x = x.frob_norm();
    if norm_x == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if rank == 0 || rank > p.min(n) {
        return Err(Error::InvalidRank {
            rank,
            rows: p,
            cols: n,
        });
    }
    if init.w.rows() != p || init.w.cols() != rank || init.h.rows() != rank || init.h.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "init is ({}x{}, {}x{}), expected ({}x{}, {}x{})",
            init.w.rows(),
            init.w.cols(),
            init.h.rows(),
            init.h.cols(),
            p,
            rank,
            rank,
            n
        )));
    }
    for m in [&init.w, &init.h] {
        if let Some((row, col, value)) = m.find_invalid(true) {
            return Err(Error::NegativeEntry { row, col, value });
        }
    }

    let xt = x.transposed();
    let mut w = init.w.clone();
    let mut h = init.h.clone();

    let mu_opts = MuOptions {
        eps_floor: config.eps_floor,
        zero_reinit: config.mu_zero_reinit,
    };

    let mut trace: Trace = Vec::new();
    let mut elapsed = 0.0f64;
    let norm_x_sq = norm_x * norm_x;
    let record = |trace: &mut Trace,
                  iteration: usize,
                  elapsed: f64,
                  w: &Dense,
                  h: &Dense|
     -> Result<f64> {
        // one pass over the data per product; the error reuses them when
        // the residual itself is not formed
        let xht = x.mul_transb(h);
        let wtx = x.premul_transa(w);
        let gram_h = h.gram_rows();
        let gram_w = w.gram_cols();
        let rel_error = match x {
            Matrix::Dense(d) => crate::matrix::dense_residual_norm(d, w, h) / norm_x,
            Matrix::Sparse(_) => {
                let sq = norm_x_sq - 2.0 * xht.inner(w) + gram_w.inner(&gram_h);
                sq.max(0.0).sqrt() / norm_x
            }
        };
        let mut grad_w = w.mul_transb(&gram_h);
        for (g, &v) in grad_w.data_mut().iter_mut().zip(xht.data()) {
            *g -= v;
        }
        let mut grad_h = gram_w.matmul(h);
        for (g, &v) in grad_h.data_mut().iter_mut().zip(wtx.data()) {
            *g -= v;
        }
        let kkt_total = kkt_residual_balanced(w, h, &grad_w, &grad_h).total();
        trace.push(TracePoint {
            iteration,
            elapsed_s: elapsed,
            rel_error,
            kkt_total,
        });
        Ok(rel_error)
    };

    record(&mut trace, 0, 0.0, &w, &h)?;

    if config.rule == UpdateRule::Hals {
        // a badly scaled start (WH >> X) would zero out whole columns
        if let Ok(alpha) = optimal_scaling(x, &w, &h) {
            if alpha > 0.0 {
                h.scale(alpha);
            }
        }
    }

    for t in 1..=config.max_outer {
        let tick = Instant::now();
        match config.rule {
            UpdateRule::Mu | UpdateRule::Hals => {
                w = accelerated_sweep(x, &h, &w, config.rule, config.inner_reps, &mu_opts)?;
                let ht = accelerated_sweep(
                    &xt,
                    &w.transpose(),
                    &h.transpose(),
                    config.rule,
                    config.inner_reps,
                    &mu_opts,
                )?;
                h = ht.transpose();
            }
            UpdateRule::Als => {
                w = als_update(x, &h)?;
                let ht = als_update(&xt, &w.transpose())?;
                h = ht.transpose();
                match optimal_scaling(x, &w, &h) {
                    Ok(alpha) => h.scale(alpha),
                    Err(Error::ZeroProduct) => {}
                    Err(e) => return Err(e),
                }
            }
            UpdateRule::Anls => {
                w = anls_update(x, &h, Some(&w), config.nnls_tol)?;
                let ht = anls_update(&xt, &w.transpose(), Some(&h.transpose()), config.nnls_tol)?;
                h = ht.transpose();
            }
        }
        elapsed += tick.elapsed().as_secs_f64();

        let rel_error = record(&mut trace, t, elapsed, &w, &h)?;
        let kkt_total = trace.last().unwrap().kkt_total;

        if elapsed >= config.max_time_s {
            break;
        }
        if config.tol_kkt > 0.0 && kkt_total < config.tol_kkt {
            break;
        }
        if config.tol_err_change > 0.0 && t >= 10 {
            let past = trace[t - 10].rel_error;
            if (past - rel_error).abs() < config.tol_err_change {
                break;
            }
        }
    }

    Ok((Factorization { w, h }, trace))
}
