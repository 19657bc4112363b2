//! Benchmark orchestration: shared random initializations per seed, one
//! wall-clock budget for every algorithm, CSV trace output.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::generate::{gen_lowrank, gen_near_separable, GenKind, GenSpec};
use crate::init::init_random_scaled;
use crate::matrix::{market, Matrix};
use crate::solvers::{run_cd, SolverConfig, UpdateRule};

/// Where the benchmark data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Path(PathBuf),
    Generated(GenSpec),
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DataSource,
}

/// A benchmark run: one dataset, a set of algorithms, a common rank, time
/// budget and seed count. Within one seed every algorithm starts from the
/// identical initial pair.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub dataset: DatasetSpec,
    pub algorithms: Vec<UpdateRule>,
    pub rank: usize,
    pub time_budget_s: f64,
    pub seeds: u64,
    pub out: PathBuf,
}

impl BenchSpec {
    // negated comparison so a NaN budget fails validation too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms listed".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidConfig("seeds must be at least 1".into()));
        }
        if !(self.time_budget_s > 0.0) {
            return Err(Error::InvalidConfig("time budget must be positive".into()));
        }
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        Ok(())
    }
}

// serde mirror for the declarative config file (TOML or JSON)
#[derive(Deserialize)]
struct RawBenchSpec {
    dataset: RawDataset,
    algorithms: Vec<UpdateRule>,
    rank: usize,
    time_budget_s: f64,
    seeds: u64,
    out: PathBuf,
}

#[derive(Deserialize)]
struct RawDataset {
    name: String,
    path: Option<PathBuf>,
    kind: Option<GenKind>,
    p: Option<usize>,
    n: Option<usize>,
    gen_rank: Option<usize>,
    #[serde(default)]
    noise: f64,
    density: Option<f64>,
    #[serde(default)]
    seed: u64,
}

impl BenchSpec {
    /// Parse a TOML or JSON spec file (tried in that order).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let raw: RawBenchSpec = match toml::from_str(text) {
            Ok(v) => v,
            Err(toml_err) => serde_json::from_str(text).map_err(|json_err| {
                Error::InvalidConfig(format!(
                    "config parses as neither TOML ({toml_err}) nor JSON ({json_err})"
                ))
            })?,
        };
        let source = match (raw.dataset.path, raw.dataset.kind) {
            (Some(path), None) => DataSource::Path(path),
            (None, Some(kind)) => {
                let (Some(p), Some(n), Some(r)) =
                    (raw.dataset.p, raw.dataset.n, raw.dataset.gen_rank)
                else {
                    return Err(Error::InvalidConfig(
                        "generated dataset needs p, n and gen_rank".into(),
                    ));
                };
                DataSource::Generated(GenSpec {
                    kind,
                    p,
                    n,
                    r,
                    noise: raw.dataset.noise,
                    density: raw.dataset.density.unwrap_or(1.0),
                    seed: raw.dataset.seed,
                })
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "dataset must set exactly one of `path` or `kind`".into(),
                ))
            }
        };
        let spec = BenchSpec {
            dataset: DatasetSpec {
                name: raw.dataset.name,
                source,
            },
            algorithms: raw.algorithms,
            rank: raw.rank,
            time_budget_s: raw.time_budget_s,
            seeds: raw.seeds,
            out: raw.out,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One CSV row of a benchmark trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub algorithm: UpdateRule,
    pub seed: u64,
    pub iteration: usize,
    pub elapsed_s: f64,
    pub rel_error: f64,
    pub kkt_total: f64,
}

pub const CSV_HEADER: [&str; 7] = [
    "dataset",
    "algorithm",
    "seed",
    "iteration",
    "elapsed_s",
    "rel_error",
    "kkt_total",
];

/// Load or generate the benchmark matrix.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Matrix> {
    match &spec.source {
        DataSource::Path(path) => market::read_nonnegative(path),
        DataSource::Generated(gen) => match gen.kind {
            GenKind::NearSeparable => Ok(gen_near_separable(gen)?.x),
            _ => Ok(gen_lowrank(gen)?.x),
        },
    }
}

/// Run the full (algorithm x seed) grid. For each seed one scaled random
/// initialization is shared by all algorithms; every run gets the same
/// wall-clock budget. Cells execute serially so the budget measures
/// uncontended compute. Rows come back in canonical order
/// (dataset, algorithm, seed, iteration).
pub fn run_benchmark(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let x = load_dataset(&spec.dataset)?;
    let mut rows = Vec::new();
    for seed in 0..spec.seeds {
        let init = init_random_scaled(&x, spec.rank, seed)?;
        for &algo in &spec.algorithms {
            let config = SolverConfig::new(algo)
                .max_outer(usize::MAX)
                .max_time_s(spec.time_budget_s)
                .seed(seed);
            let (_, trace) = run_cd(&x, spec.rank, &config, &init)?;
            for pt in trace {
                rows.push(BenchRow {
                    dataset: spec.dataset.name.clone(),
                    algorithm: algo,
                    seed,
                    iteration: pt.iteration,
                    elapsed_s: pt.elapsed_s,
                    rel_error: pt.rel_error,
                    kkt_total: pt.kkt_total,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.dataset.as_str(), a.algorithm.name(), a.seed, a.iteration).cmp(&(
            b.dataset.as_str(),
            b.algorithm.name(),
            b.seed,
            b.iteration,
        ))
    });
    Ok(rows)
}

/// Write rows with the stable schema
/// `dataset,algorithm,seed,iteration,elapsed_s,rel_error,kkt_total`.
pub fn write_csv(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::InvalidConfig(format!(
        "cannot open {}: {e}",
        path.display()
    )))?;
    let io_wrap = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    writer.write_record(CSV_HEADER).map_err(io_wrap)?;
    for row in rows {
        writer
            .write_record(&[
                row.dataset.clone(),
                row.algorithm.name().to_string(),
                row.seed.to_string(),
                row.iteration.to_string(),
                row.elapsed_s.to_string(),
                row.rel_error.to_string(),
                row.kkt_total.to_string(),
            ])
            .map_err(io_wrap)?;
    }
    writer.flush().map_err(|e| Error::InvalidConfig(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Run a benchmark and persist its trace.
pub fn run_benchmark_to_file(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    let rows = run_benchmark(spec)?;
    write_csv(&spec.out, &rows)?;
    Ok(rows)
}

/// Median of a non-empty slice (average of the middle pair for even length).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Final rel_error of each (algorithm, seed) cell.
pub fn final_errors(rows: &[BenchRow], algorithm: UpdateRule) -> Vec<f64> {
    let mut by_seed: std::collections::BTreeMap<u64, (usize, f64)> = Default::default();
    for row in rows.iter().filter(|r| r.algorithm == algorithm) {
        let entry = by_seed.entry(row.seed).or_insert((0, f64::NAN));
        if row.iteration >= entry.0 {
            *entry = (row.iteration, row.rel_error);
        }
    }
    by_seed.values().map(|&(_, e)| e).collect()
}
