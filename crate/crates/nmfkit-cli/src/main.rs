use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nmfkit::bench::{run_benchmark_to_file, BenchSpec};
use nmfkit::generate::{gen_lowrank, gen_near_separable, GenKind, GenSpec};
use nmfkit::init::{init_clustering, init_colsubset, init_random_scaled, init_svd_split};
use nmfkit::matrix::{market, Matrix};
use nmfkit::separable::{recover_h, spa, spa_refine};
use nmfkit::solvers::{run_cd, SolverConfig, Trace, UpdateRule};
use nmfkit::Factorization;

#[derive(Parser)]
#[command(
    name = "nmfkit",
    version,
    about = "Nonnegative matrix factorization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a Matrix Market file as X ~ W H with W, H >= 0.
    Factorize(FactorizeArgs),
    /// Extract anchor columns of a (near-)separable matrix.
    Spa(SpaArgs),
    /// Run a benchmark described by a TOML or JSON spec file.
    Bench(BenchArgs),
    /// Generate a synthetic instance and write it as Matrix Market.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Mu,
    Als,
    Anls,
    Hals,
}

impl From<AlgoArg> for UpdateRule {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Mu => UpdateRule::Mu,
            AlgoArg::Als => UpdateRule::Als,
            AlgoArg::Anls => UpdateRule::Anls,
            AlgoArg::Hals => UpdateRule::Hals,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    /// Seeded uniform random entries, rescaled against the data.
    Random,
    /// Nonnegative parts of the leading SVD factors.
    Nndsvd,
    /// k-means centroids with a scaled indicator.
    Kmeans,
    /// Column subset picked by successive projection.
    Spa,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Input matrix (Matrix Market, nonnegative)
    #[arg(long)]
    input: PathBuf,
    /// Factorization rank
    #[arg(long)]
    rank: usize,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// Wall-clock budget in seconds
    #[arg(long, default_value_t = f64::INFINITY)]
    max_time: f64,
    /// Maximum outer iterations
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Stop once the relative error changes less than this over 10 iterations
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write W here (Matrix Market array)
    #[arg(long)]
    out_w: Option<PathBuf>,
    /// Write H here (Matrix Market array)
    #[arg(long)]
    out_h: Option<PathBuf>,
    /// Write the per-iteration trace here (CSV)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SpaArgs {
    /// Input matrix (Matrix Market)
    #[arg(long)]
    input: PathBuf,
    /// Number of anchors to extract
    #[arg(long)]
    rank: usize,
    /// Scale columns to unit l1 norm first (dropping zero columns)
    #[arg(long)]
    normalize: bool,
    /// Apply one refinement pass to the extracted set
    #[arg(long)]
    refine: bool,
    /// Write the anchor indices here (text, one 0-based index per line)
    #[arg(long)]
    out_indices: Option<PathBuf>,
    /// Write the recovered H here (Matrix Market array)
    #[arg(long)]
    out_h: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark spec file (.toml or .json)
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV (overrides the spec's `out`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// dense | sparse | separable
    #[arg(long)]
    kind: String,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    /// Noise level (relative for low-rank kinds, per-column l2 for separable)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of nonzero H entries (sparse kind only)
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output matrix path (Matrix Market)
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted truth (factors, anchor indices) here
    #[arg(long)]
    out_truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Factorize(args) => factorize(args),
        Command::Spa(args) => run_spa(args),
        Command::Bench(args) => bench(args),
        Command::Gen(args) => generate(args),
    }
}

fn factorize(args: FactorizeArgs) -> Result<()> {
    let x = market::read_nonnegative(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let rule: UpdateRule = args.algo.into();
    let init = build_init(&x, args.rank, args.init, args.seed)?;
    let config = SolverConfig::new(rule)
        .max_outer(args.max_iter)
        .max_time_s(args.max_time)
        .tol_err_change(args.tol)
        .seed(args.seed);
    let (factors, trace) = run_cd(&x, args.rank, &config, &init)?;

    let last = trace.last().expect("trace has the initial entry");
    println!(
        "{} rank {}: rel_error {:.6e} after {} iterations ({:.3}s)",
        rule, args.rank, last.rel_error, last.iteration, last.elapsed_s
    );
    if let Some(path) = &args.out_w {
        market::write(path, &Matrix::Dense(factors.w.clone()))?;
    }
    if let Some(path) = &args.out_h {
        market::write(path, &Matrix::Dense(factors.h.clone()))?;
    }
    if let Some(path) = &args.trace {
        write_trace_csv(path, &trace)?;
    }
    Ok(())
}

fn build_init(x: &Matrix, rank: usize, kind: InitArg, seed: u64) -> Result<Factorization> {
    let init = match kind {
        InitArg::Random => init_random_scaled(x, rank, seed)?,
        InitArg::Nndsvd => init_svd_split(x, rank)?.factorization,
        InitArg::Kmeans => init_clustering(x, rank, seed)?,
        InitArg::Spa => init_colsubset(x, rank)?,
    };
    Ok(init)
}

fn write_trace_csv(path: &PathBuf, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["iteration", "elapsed_s", "rel_error", "kkt_total"])?;
    for pt in trace {
        w.write_record(&[
            pt.iteration.to_string(),
            pt.elapsed_s.to_string(),
            pt.rel_error.to_string(),
            pt.kkt_total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_spa(args: SpaArgs) -> Result<()> {
    let x = market::read(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut anchors = spa(&x, args.rank, args.normalize)?;
    if args.refine {
        anchors = spa_refine(&x, &anchors)?;
    }
    println!(
        "anchors: {}",
        anchors
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    if let Some(path) = &args.out_indices {
        let mut text = String::new();
        for i in &anchors.indices {
            text.push_str(&i.to_string());
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.out_h {
        let h = recover_h(&x, &anchors.indices)?;
        market::write(path, &Matrix::Dense(h))?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec = BenchSpec::from_config_str(&text)?;
    if let Some(out) = args.out {
        spec.out = out;
    }
    let rows = run_benchmark_to_file(&spec)?;
    println!(
        "wrote {} trace rows for '{}' to {}",
        rows.len(),
        spec.dataset.name,
        spec.out.display()
    );
    Ok(())
}

fn generate(args: GenArgs) -> Result<()> {
    let kind: GenKind = args.kind.parse()?;
    let spec = GenSpec {
        kind,
        p: args.p,
        n: args.n,
        r: args.rank,
        noise: args.noise,
        density: args.density,
        seed: args.seed,
    };
    let truth_dir = match &args.out_truth {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(dir.clone())
        }
        None => None,
    };
    match kind {
        GenKind::NearSeparable => {
            let inst = gen_near_separable(&spec)?;
            market::write(&args.out, &inst.x)?;
            if let Some(dir) = truth_dir {
                market::write(dir.join("truth_w.mtx"), &Matrix::Dense(inst.truth.w))?;
                market::write(dir.join("truth_h.mtx"), &Matrix::Dense(inst.truth.h))?;
                let mut text = String::new();
                for i in &inst.anchors {
                    text.push_str(&i.to_string());
                    text.push('\n');
                }
                fs::write(dir.join("anchors.txt"), text)?;
            }
        }
        GenKind::DenseLowrank | GenKind::SparseLowrank => {
            if kind == GenKind::SparseLowrank && !(args.density > 0.0 && args.density <= 1.0) {
                bail!("--density must lie in (0, 1]");
            }
            let inst = gen_lowrank(&spec)?;
            market::write(&args.out, &inst.x)?;
            if let Some(dir) = truth_dir {
                market::write(dir.join("truth_w.mtx"), &Matrix::Dense(inst.truth.w))?;
                market::write(dir.join("truth_h.mtx"), &Matrix::Dense(inst.truth.h))?;
            }
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
