//! Command line front-end.
//!
//! Exit codes: 0 success, 2 usage error, 3 numeric degeneracy, 4 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{self, fmt_f64, run_experiment, run_solve_trials, summarize, Problem};
use crate::mtx;
use crate::outaccess::CompressedSolution;
use crate::problems::{self, geometric_spectrum, ProblemMeta};
use crate::reference::exact_min_norm_solve;
use crate::rng::RandomStream;
use crate::solver::{SolverParams, SparseIterate};
use crate::sqmatrix::SqMatrix;

#[derive(Debug, Parser)]
#[command(
    name = "qinspired",
    version,
    about = "Sub-sampled stochastic gradient solver with sample and query access to the solution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a consistent test problem with a geometric singular spectrum.
    Generate(GenerateArgs),
    /// Run the solver and write the sparse dual vector y as CSV.
    Solve(SolveArgs),
    /// Print entries of x = Aᵀy.
    Query(QueryArgs),
    /// Draw indices j with probability x_j² / ‖x‖².
    Sample(SampleArgs),
    /// Repeated trials; writes median and 5%/95% curves as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Number of nonzero singular values.
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 1e-15)]
    pub spec_lo: f64,
    #[arg(long, default_value_t = 9.0)]
    pub spec_hi: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Where the system comes from: a generated-problem directory or explicit files.
#[derive(Debug, Args, Clone)]
pub struct SourceArgs {
    /// Directory holding A.mtx, b.mtx and optionally xstar.mtx and meta.txt.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    #[arg(long)]
    pub xstar: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    /// κ²; read from meta.txt when omitted.
    #[arg(long)]
    pub kappa_sq: Option<f64>,
    /// κ_F²; read from meta.txt, or derived from κ² and ‖A‖ when omitted.
    #[arg(long)]
    pub kappa_f_sq: Option<f64>,
    #[arg(long = "R")]
    pub rows: Option<usize>,
    #[arg(long = "C")]
    pub cols: Option<usize>,
    #[arg(long = "K")]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent solves; the iterate of trial 0 is written to --out.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value = "y.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// CSV written by `solve`.
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long = "index", required = true, num_args = 1..)]
    pub indices: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 1e-15)]
    pub spec_lo: f64,
    #[arg(long, default_value_t = 9.0)]
    pub spec_hi: f64,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 40)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record curves every this many iterations (default: K/50).
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long, default_value = "experiment.csv")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidInput(e.to_string()))?;
    run(cli, out)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Query(a) => cmd_query(&a, out),
        Command::Sample(a) => cmd_sample(&a, out),
        Command::Experiment(a) => cmd_experiment(&a, out),
    }
}

fn generated(spec: &SpectrumArgs, seed: u64) -> Result<problems::GeneratedProblem> {
    if spec.rank == 0 {
        return Err(Error::InvalidInput("--rank must be at least 1".into()));
    }
    let spectrum = geometric_spectrum(spec.rank, spec.spec_lo, spec.spec_hi)?;
    problems::generate(spec.n, spec.d, &spectrum, &mut RandomStream::new(seed))
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let p = generated(&a.spectrum, a.seed)?;
    let meta = p.meta(a.seed, a.spectrum.spec_lo, a.spectrum.spec_hi);
    p.write_to_dir(&a.out, &meta)?;
    writeln!(
        out,
        "wrote {} (n={} d={} rank={} kappa_sq={} kappa_f_sq={})",
        a.out.display(),
        meta.n,
        meta.d,
        meta.rank,
        meta.kappa_sq,
        meta.kappa_f_sq
    )?;
    Ok(())
}

/// A loaded system plus whatever metadata came with it.
pub struct LoadedSystem {
    pub matrix: SqMatrix,
    pub b: Option<Vec<f64>>,
    pub x_star: Option<Vec<f64>>,
    pub meta: Option<ProblemMeta>,
}

fn resolve(src: &SourceArgs, name: &str, explicit: &Option<PathBuf>) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| src.problem.as_ref().map(|d| d.join(name)))
}

pub fn load_system(src: &SourceArgs) -> Result<LoadedSystem> {
    let a_path = resolve(src, "A.mtx", &src.matrix)
        .ok_or_else(|| Error::InvalidInput("need --problem DIR or --matrix FILE".into()))?;
    let data = mtx::read_matrix(&a_path)?;
    let matrix = SqMatrix::from_row_major(data.nrows, data.ncols, data.entries)?;

    let optional = |p: Option<PathBuf>, must: bool| -> Result<Option<Vec<f64>>> {
        match p {
            Some(p) if must || p.exists() => mtx::read_vector(p).map(Some),
            _ => Ok(None),
        }
    };
    let b = optional(resolve(src, "b.mtx", &src.rhs), src.rhs.is_some())?;
    let x_star = optional(resolve(src, "xstar.mtx", &src.xstar), src.xstar.is_some())?;
    let meta = match src.problem.as_ref().map(|d| d.join("meta.txt")) {
        Some(p) if p.exists() => Some(ProblemMeta::parse(&fs::read_to_string(p)?)?),
        _ => None,
    };
    if let Some(b) = &b {
        if b.len() != matrix.nrows() {
            return Err(Error::InvalidInput(format!(
                "b has length {}, A has {} rows",
                b.len(),
                matrix.nrows()
            )));
        }
    }
    if let Some(x) = &x_star {
        if x.len() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "x* has length {}, A has {} columns",
                x.len(),
                matrix.ncols()
            )));
        }
    }
    Ok(LoadedSystem {
        matrix,
        b,
        x_star,
        meta,
    })
}

const POWER_ITERS: usize = 500;

/// Default parameters from κ values (flags or metadata), then overrides.
pub fn resolve_params(
    m: &SqMatrix,
    meta: Option<&ProblemMeta>,
    a: &ParamArgs,
    seed: u64,
) -> Result<SolverParams> {
    let kappa_sq = a.kappa_sq.or(meta.map(|m| m.kappa_sq)).ok_or_else(|| {
        Error::InvalidInput("--kappa-sq is required when the problem has no meta.txt".into())
    })?;
    let spectral_sq = match (a.kappa_f_sq, meta) {
        (None, Some(meta)) => meta.spectral_sq,
        _ => m.estimate_spectral_norm(POWER_ITERS, &mut RandomStream::new(seed).split(u64::MAX)),
    };
    let kappa_f_sq = a
        .kappa_f_sq
        .or(meta.map(|m| m.kappa_f_sq))
        .unwrap_or(kappa_sq * m.frob_sq() / spectral_sq);
    let mut p = SolverParams::from_conditioning(m, a.eps, kappa_sq, kappa_f_sq, Some(spectral_sq))?;

    let positive = |v: usize, flag: &str| -> Result<usize> {
        if v == 0 {
            Err(Error::InvalidInput(format!("--{flag} must be positive")))
        } else {
            Ok(v)
        }
    };
    if let Some(r) = a.rows {
        p.row_batch = positive(r, "R")?;
    }
    if let Some(c) = a.cols {
        p.col_batch = positive(c, "C")?;
    }
    if let Some(k) = a.iterations {
        p.iterations = k;
    }
    if let Some(alpha) = a.alpha {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput("--alpha must be positive".into()));
        }
        p.alpha = alpha;
    }
    Ok(p)
}

fn params_line(p: &SolverParams) -> String {
    format!(
        "R={} C={} K={} alpha={} eps={} kappa_sq={} kappa_f_sq={}",
        p.row_batch, p.col_batch, p.iterations, p.alpha, p.eps, p.kappa_sq, p.kappa_f_sq
    )
}

fn x_star_or_solve(sys: &LoadedSystem, b: &[f64]) -> Result<Vec<f64>> {
    match &sys.x_star {
        Some(x) => Ok(x.clone()),
        None => Ok(exact_min_norm_solve(&sys.matrix, b)?.x_star),
    }
}

pub fn write_iterate(path: &Path, y: &SparseIterate) -> Result<()> {
    let mut s = String::from("index,value\n");
    for (i, v) in y.iter() {
        s.push_str(&format!("{i},{}\n", fmt_f64(v)));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_iterate(path: &Path) -> Result<SparseIterate> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let bad = || Error::Parse {
            line: lineno + 1,
            msg: format!("expected 'index,value', got '{line}'"),
        };
        let (i, v) = line.split_once(',').ok_or_else(bad)?;
        let i: usize = i.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        entries.push((i, v));
    }
    Ok(SparseIterate::from_entries(entries))
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::InvalidInput("--trials must be at least 1".into()));
    }
    let sys = load_system(&a.source)?;
    let b = sys
        .b
        .clone()
        .ok_or_else(|| Error::InvalidInput("right-hand side b is required".into()))?;
    let params = resolve_params(&sys.matrix, sys.meta.as_ref(), &a.params, a.seed)?;
    let x_star = x_star_or_solve(&sys, &b)?;
    let problem = Problem {
        matrix: &sys.matrix,
        b: &b,
        x_star: &x_star,
    };

    writeln!(out, "# {}", params_line(&params))?;
    let outcomes = run_solve_trials(problem, &params, a.trials, a.seed)?;
    write!(out, "{}", experiment::trials_csv(&outcomes))?;
    write_iterate(&a.out, &outcomes[0].iterate)?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.rel_error).collect();
    let (median, q05, q95) = summarize(&errors);
    let first = &outcomes[0];
    writeln!(
        out,
        "# nnz={} phi={} rel_error={} median_rel_error={} q05={} q95={}",
        first.nnz,
        fmt_f64(first.phi),
        fmt_f64(first.rel_error),
        fmt_f64(median),
        fmt_f64(q05),
        fmt_f64(q95)
    )?;
    Ok(())
}

pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let sys = load_system(&a.source)?;
    let sol = CompressedSolution::new(&sys.matrix, read_iterate(&a.y)?)?;
    writeln!(out, "index,value")?;
    for &j in &a.indices {
        writeln!(out, "{j},{}", fmt_f64(sol.query(j)?))?;
    }
    Ok(())
}

pub fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let sys = load_system(&a.source)?;
    let sol = CompressedSolution::new(&sys.matrix, read_iterate(&a.y)?)?;
    let mut rng = RandomStream::new(a.seed);
    let phi = sol.phi()?;
    let mut rounds = 0usize;
    for _ in 0..a.count {
        let s = sol.sample(&mut rng)?;
        rounds += s.iterations_used;
        writeln!(out, "{}", s.accepted_index)?;
    }
    let mean = if a.count == 0 {
        f64::NAN
    } else {
        rounds as f64 / a.count as f64
    };
    writeln!(
        out,
        "# count={} mean_rounds={} phi={}",
        a.count,
        fmt_f64(mean),
        fmt_f64(phi)
    )?;
    Ok(())
}

pub fn cmd_experiment(a: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::InvalidInput("--trials must be at least 1".into()));
    }
    let (matrix, b, x_star, meta) = match (a.n, a.d, a.rank) {
        (Some(n), Some(d), Some(rank)) => {
            let spec = SpectrumArgs {
                n,
                d,
                rank,
                spec_lo: a.spec_lo,
                spec_hi: a.spec_hi,
            };
            let p = generated(&spec, a.seed)?;
            let meta = p.meta(a.seed, a.spec_lo, a.spec_hi);
            (p.matrix, p.b, p.x_star, Some(meta))
        }
        (None, None, None) => {
            let sys = load_system(&a.source)?;
            let b = sys
                .b
                .clone()
                .ok_or_else(|| Error::InvalidInput("right-hand side b is required".into()))?;
            let x_star = x_star_or_solve(&sys, &b)?;
            (sys.matrix, b, x_star, sys.meta)
        }
        _ => {
            return Err(Error::InvalidInput(
                "--n, --d and --rank go together".into(),
            ))
        }
    };
    let params = resolve_params(&matrix, meta.as_ref(), &a.params, a.seed)?;
    let every = a.record_every.unwrap_or((params.iterations / 50).max(1));
    let problem = Problem {
        matrix: &matrix,
        b: &b,
        x_star: &x_star,
    };
    let result = run_experiment(problem, &params, a.trials, a.seed, every)?;
    fs::write(&a.out, result.to_csv())?;
    writeln!(out, "# {}", params_line(&params))?;
    writeln!(out, "# trials={} wrote {}", a.trials, a.out.display())?;
    Ok(())
}
