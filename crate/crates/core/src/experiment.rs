//! Repeated-trial driver producing median / 5% / 95% curves.
//!
//! Each trial owns the stream `RandomStream::new(seed).split(trial)`, so
//! results are independent of how trials are scheduled across threads.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::outaccess::CompressedSolution;
use crate::reference::{gd_iterates, rk_averaging_step};
use crate::rng::RandomStream;
use crate::solver::{self, SolverParams, SparseIterate};
use crate::sqmatrix::{norm_sq, SqMatrix};

/// Environment variable selecting the number of worker threads for trials.
pub const THREADS_ENV: &str = "QINSPIRED_THREADS";

/// A consistent system with its known minimum-norm solution.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub matrix: &'a SqMatrix,
    pub b: &'a [f64],
    pub x_star: &'a [f64],
}

/// `‖x − x*‖ / ‖x*‖`; `‖x‖` itself when `x* = 0`.
pub fn relative_error(x: &[f64], x_star: &[f64]) -> f64 {
    let diff: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum();
    let denom = norm_sq(x_star);
    if denom == 0.0 {
        diff.sqrt()
    } else {
        (diff / denom).sqrt()
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// `(median, q05, q95)` of the finite values.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    (
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.05),
        quantile_sorted(&v, 0.95),
    )
}

/// Runs `f(trial)` for every trial, on the pool sized by [`THREADS_ENV`] if set.
pub fn run_parallel<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let work = || {
        (0..trials)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<T>>>()
    };
    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(threads) if threads > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work),
        _ => work(),
    }
}

/// Result of one independent solve.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub rel_error: f64,
    pub nnz: usize,
    /// `NaN` when `Aᵀy` is degenerate.
    pub phi: f64,
    pub iterate: SparseIterate,
}

pub fn run_solve_trials(
    problem: Problem<'_>,
    params: &SolverParams,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    let root = RandomStream::new(seed);
    run_parallel(trials, |trial| {
        let mut rng = root.split(trial as u64);
        let sol = solver::solve(problem.matrix, problem.b, params, &mut rng)?;
        Ok(TrialOutcome {
            trial,
            rel_error: relative_error(&sol.to_dense(), problem.x_star),
            nnz: sol.nnz(),
            phi: sol.phi().unwrap_or(f64::NAN),
            iterate: sol.into_iterate(),
        })
    })
}

/// `trial,nnz,phi,rel_error`, one row per trial.
pub fn trials_csv(outcomes: &[TrialOutcome]) -> String {
    let mut s = String::from("trial,nnz,phi,rel_error\n");
    for o in outcomes {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            o.trial,
            o.nnz,
            fmt_f64(o.phi),
            fmt_f64(o.rel_error)
        );
    }
    s
}

/// 17 significant digits; `nan` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

/// Iterations `k` at which curves are sampled: multiples of `every`, plus `K`.
pub fn record_points(iterations: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut ks: Vec<usize> = (1..=iterations).filter(|k| k % every == 0).collect();
    if iterations > 0 && ks.last() != Some(&iterations) {
        ks.push(iterations);
    }
    ks
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Row and column sampled iteration on `y`.
    Alg1,
    /// Same row draws, exact inner products.
    RkAveraging,
    GradientDescent,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::RkAveraging => "rk-averaging",
            Algorithm::GradientDescent => "gd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    RelError,
    Phi,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::RelError => "rel_error",
            Metric::Phi => "phi",
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub metric: Metric,
    pub algorithm: Algorithm,
    pub k: usize,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub points: Vec<CurvePoint>,
}

pub const CSV_HEADER: &str = "metric,algorithm,k,median,q05,q95";

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.metric.name(),
                p.algorithm.name(),
                p.k,
                fmt_f64(p.median),
                fmt_f64(p.q05),
                fmt_f64(p.q95)
            );
        }
        s
    }

    /// Points of one curve in increasing `k`.
    pub fn curve(&self, metric: Metric, algorithm: Algorithm) -> Vec<&CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.metric == metric && p.algorithm == algorithm)
            .collect()
    }
}

struct TrialCurves {
    alg1_error: Vec<f64>,
    alg1_phi: Vec<f64>,
    rk_error: Vec<f64>,
}

/// Runs `trials` independent copies of the sampled iteration, with randomized
/// Kaczmarz averaging driven by the same row draws, and deterministic gradient
/// descent once. Curves are recorded at `record_points(K, record_every)`.
pub fn run_experiment(
    problem: Problem<'_>,
    params: &SolverParams,
    trials: usize,
    seed: u64,
    record_every: usize,
) -> Result<ExperimentResult> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    params.validate()?;
    let m = problem.matrix;
    let ks = record_points(params.iterations, record_every);
    let root = RandomStream::new(seed);

    let per_trial = run_parallel(trials, |trial| {
        let mut rng = root.split(trial as u64);
        let mut y = SparseIterate::new();
        let mut x_rk = vec![0.0; m.ncols()];
        let mut curves = TrialCurves {
            alg1_error: Vec::with_capacity(ks.len()),
            alg1_phi: Vec::with_capacity(ks.len()),
            rk_error: Vec::with_capacity(ks.len()),
        };
        let mut next = ks.iter().peekable();
        for k in 1..=params.iterations {
            let draw = solver::step(m, problem.b, &mut y, params, &mut rng)?;
            x_rk = rk_averaging_step(m, problem.b, &x_rk, &draw.rows, params.alpha);
            if next.peek() == Some(&&k) {
                next.next();
                let sol = CompressedSolution::new(m, y.clone())?;
                curves
                    .alg1_error
                    .push(relative_error(&sol.to_dense(), problem.x_star));
                curves.alg1_phi.push(sol.phi().unwrap_or(f64::NAN));
                curves.rk_error.push(relative_error(&x_rk, problem.x_star));
            }
        }
        Ok(curves)
    })?;

    let gd = gd_iterates(m, problem.b, params.alpha, params.iterations);

    let mut points = Vec::new();
    let mut push_curve = |metric, algorithm, column: &dyn Fn(&TrialCurves, usize) -> f64| {
        for (idx, &k) in ks.iter().enumerate() {
            let vals: Vec<f64> = per_trial.iter().map(|t| column(t, idx)).collect();
            let (median, q05, q95) = summarize(&vals);
            points.push(CurvePoint {
                metric,
                algorithm,
                k,
                median,
                q05,
                q95,
            });
        }
    };
    push_curve(Metric::RelError, Algorithm::Alg1, &|t, i| t.alg1_error[i]);
    push_curve(Metric::RelError, Algorithm::RkAveraging, &|t, i| {
        t.rk_error[i]
    });
    push_curve(Metric::RelError, Algorithm::GradientDescent, &|_, i| {
        relative_error(&gd[ks[i]], problem.x_star)
    });
    push_curve(Metric::Phi, Algorithm::Alg1, &|t, i| t.alg1_phi[i]);

    Ok(ExperimentResult { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.05) - 1.2).abs() < 1e-15);
        assert!(quantile_sorted(&[], 0.5).is_nan());
        assert_eq!(summarize(&[f64::NAN, 2.0]), (2.0, 2.0, 2.0));
    }

    #[test]
    fn record_points_include_last() {
        assert_eq!(record_points(10, 4), vec![4, 8, 10]);
        assert_eq!(record_points(8, 4), vec![4, 8]);
        assert_eq!(record_points(3, 0), vec![1, 2, 3]);
        assert!(record_points(0, 5).is_empty());
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(&[0.0, 0.0], &[3.0, 4.0]), 1.0);
        assert_eq!(relative_error(&[3.0, 4.0], &[3.0, 4.0]), 0.0);
        assert_eq!(relative_error(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
