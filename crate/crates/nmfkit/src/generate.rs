//! Seeded synthetic instance generators: low-rank data (dense or sparse)
//! and planted near-separable data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Csc, Dense, Matrix};
use crate::objective::Factorization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    DenseLowrank,
    SparseLowrank,
    NearSeparable,
}

impl std::str::FromStr for GenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "dense-lowrank" => Ok(GenKind::DenseLowrank),
            "sparse" | "sparse-lowrank" => Ok(GenKind::SparseLowrank),
            "separable" | "near-separable" => Ok(GenKind::NearSeparable),
            other => Err(Error::InvalidConfig(format!(
                "unknown generator kind '{other}' (expected dense, sparse, or separable)"
            ))),
        }
    }
}

/// Generator parameters. `density` applies to the sparse kind only and must
/// lie in (0, 1]; `noise` is the relative noise level and must be >= 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub p: usize,
    pub n: usize,
    pub r: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_density() -> f64 {
    1.0
}

impl GenSpec {
    // negated comparisons so NaN parameters fail validation too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 || self.r == 0 || self.r > self.p.min(self.n) {
            return Err(Error::InvalidRank {
                rank: self.r,
                rows: self.p,
                cols: self.n,
            });
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise {} must be nonnegative",
                self.noise
            )));
        }
        Ok(())
    }
}

/// A generated low-rank instance and its planted factors.
#[derive(Debug, Clone)]
pub struct LowRankInstance {
    pub x: Matrix,
    pub truth: Factorization,
}

/// `X = W H + N`, clamped at zero: `W`, `H` have i.i.d. uniform [0, 1)
/// entries (the sparse kind zeroes the entries of `H` below its density
/// quantile), and `N` is i.i.d. Gaussian with scale
/// `noise * ||WH||_F / sqrt(p n)`. The sparse kind stores `X` column-
/// compressed. Deterministic per seed.
pub fn gen_lowrank(spec: &GenSpec) -> Result<LowRankInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (p, n, r) = (spec.p, spec.n, spec.r);

    let mut w = Dense::zeros(p, r);
    for v in w.data_mut() {
        *v = rng.random();
    }
    let mut h = Dense::zeros(r, n);
    for v in h.data_mut() {
        *v = rng.random();
    }
    if spec.kind == GenKind::SparseLowrank && spec.density < 1.0 {
        let mut sorted: Vec<f64> = h.data().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cut = ((1.0 - spec.density) * sorted.len() as f64).floor() as usize;
        let threshold = sorted[cut.min(sorted.len() - 1)];
        for v in h.data_mut() {
            if *v < threshold {
                *v = 0.0;
            }
        }
    }

    let mut x = w.matmul(&h);
    if spec.noise > 0.0 {
        let scale = spec.noise * x.frob_norm() / ((p * n) as f64).sqrt();
        for v in x.data_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v += scale * g;
        }
    }
    x.clamp_min(0.0);

    let x = match spec.kind {
        GenKind::SparseLowrank => Matrix::Sparse(Csc::from_dense(&x)),
        _ => Matrix::Dense(x),
    };
    Ok(LowRankInstance {
        x,
        truth: Factorization { w, h },
    })
}

/// A planted near-separable instance.
#[derive(Debug, Clone)]
pub struct SeparableInstance {
    pub x: Matrix,
    /// Positions of the planted anchor columns, in basis order.
    pub anchors: Vec<usize>,
    pub truth: Factorization,
}

/// `X = W [I_r, H'] P + N`: `W` has i.i.d. uniform entries, the columns of
/// `H'` are drawn uniformly from the unit simplex, `P` is a seeded random
/// column permutation, and each noise column has l2 norm exactly `noise`.
/// Noise is not clamped, so small negative entries are possible.
pub fn gen_near_separable(spec: &GenSpec) -> Result<SeparableInstance> {
    spec.validate()?;
    if spec.n <= spec.r {
        return Err(Error::InvalidRank {
            rank: spec.r,
            rows: spec.p,
            cols: spec.n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (p, n, r) = (spec.p, spec.n, spec.r);

    let mut w = Dense::zeros(p, r);
    for v in w.data_mut() {
        *v = rng.random();
    }
    // mixing weights: Dirichlet(1) via normalized exponentials
    let mut mix = Dense::zeros(r, n);
    for k in 0..r {
        mix.set(k, k, 1.0);
    }
    for j in r..n {
        let draws: Vec<f64> = (0..r).map(|_| -rng.random::<f64>().ln()).collect();
        let sum: f64 = draws.iter().sum();
        for k in 0..r {
            mix.set(k, j, draws[k] / sum);
        }
    }

    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }

    let clean = w.matmul(&mix);
    let mut x = Dense::zeros(p, n);
    let mut h = Dense::zeros(r, n);
    for src in 0..n {
        let dst = perm[src];
        for i in 0..p {
            x.set(i, dst, clean.get(i, src));
        }
        for k in 0..r {
            h.set(k, dst, mix.get(k, src));
        }
    }
    if spec.noise > 0.0 {
        for j in 0..n {
            let noise: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let norm: f64 = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (i, nv) in noise.iter().enumerate() {
                    x.set(i, j, x.get(i, j) + spec.noise * nv / norm);
                }
            }
        }
    }

    let anchors: Vec<usize> = (0..r).map(|k| perm[k]).collect();
    Ok(SeparableInstance {
        x: Matrix::Dense(x),
        anchors,
        truth: Factorization { w, h },
    })
}
