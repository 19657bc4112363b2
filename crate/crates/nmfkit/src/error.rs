use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("matrix market parse error ({path}, line {line}): {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative entry {value} at ({row}, {col}) where nonnegative data is required")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix has no nonzero columns")]
    AllColumnsZero,

    #[error("input matrix is identically zero")]
    ZeroMatrix,

    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    InvalidRank {
        rank: usize,
        rows: usize,
        cols: usize,
    },

    #[error("numerically rank deficient: residual vanished after {extracted} of {requested} extractions")]
    RankDeficient { extracted: usize, requested: usize },

    #[error("product WH is identically zero; scaling undefined")]
    ZeroProduct,

    #[error("need at least {needed} distinct columns, found {found}")]
    TooFewDistinctColumns { needed: usize, found: usize },

    #[error("unknown algorithm '{0}' (expected mu, als, anls, or hals)")]
    UnknownAlgorithm(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
