//! Independent oracles for checking the randomized solver.
//!
//! Nothing here shares code paths with [`crate::solver`] beyond the
//! [`SqMatrix`] storage. The moment checks enumerate every possible batch with
//! its exact probability instead of sampling, so the identities and bounds are
//! tested without Monte Carlo error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sqmatrix::{axpy, dot, norm_sq, SqMatrix};

/// Minimum-norm solution of a consistent system.
#[derive(Clone, Debug)]
pub struct DenseSolveResult {
    pub x_star: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Relative residual `‖Ax − b‖ / ‖b‖` at which the iterative solve stops.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

/// `x* = A⁺b` for consistent `b`, by conjugate gradients on the normal
/// equations (CGLS) started from zero.
///
/// Every CGLS iterate lies in `range(Aᵀ)`, so the limit is the minimum-norm
/// solution.
pub fn exact_min_norm_solve(m: &SqMatrix, b: &[f64]) -> Result<DenseSolveResult> {
    exact_min_norm_solve_with_budget(m, b, 10 * m.ncols().min(m.nrows()) + 100)
}

pub fn exact_min_norm_solve_with_budget(
    m: &SqMatrix,
    b: &[f64],
    max_iters: usize,
) -> Result<DenseSolveResult> {
    if b.len() != m.nrows() {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.nrows()
        )));
    }
    let b_norm = norm_sq(b).sqrt();
    let mut x = vec![0.0; m.ncols()];
    if b_norm == 0.0 {
        return Ok(DenseSolveResult {
            x_star: x,
            residual_norm: 0.0,
            iterations: 0,
        });
    }

    let mut r = b.to_vec();
    let mut s = m.t_matvec(&r);
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);
    let grad0 = gamma.sqrt();

    let mut iterations = 0;
    let mut rel_residual = 1.0;
    while iterations < max_iters {
        if rel_residual <= SOLVE_TOLERANCE || gamma.sqrt() <= 1e-15 * grad0 {
            break;
        }
        let q = m.matvec(&p);
        let delta = norm_sq(&q);
        if delta == 0.0 {
            break;
        }
        let step = gamma / delta;
        axpy(step, &p, &mut x);
        axpy(-step, &q, &mut r);
        s = m.t_matvec(&r);
        let gamma_next = norm_sq(&s);
        let beta = gamma_next / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_next;
        iterations += 1;
        rel_residual = norm_sq(&r).sqrt() / b_norm;
    }

    let residual_norm = residual(m, &x, b);
    if residual_norm > SOLVE_TOLERANCE.max(1e-10) * b_norm {
        return Err(Error::NoConvergence {
            iterations,
            rel_residual: residual_norm / b_norm,
        });
    }
    Ok(DenseSolveResult {
        x_star: x,
        residual_norm,
        iterations,
    })
}

fn residual(m: &SqMatrix, x: &[f64], b: &[f64]) -> f64 {
    m.matvec(x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic gradient descent `x_{k+1} = x_k − α Aᵀ(Ax_k − b)` from zero.
/// Returns `x_0, …, x_K`.
pub fn gd_iterates(m: &SqMatrix, b: &[f64], alpha: f64, iterations: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(iterations + 1);
    let mut x = vec![0.0; m.ncols()];
    out.push(x.clone());
    for _ in 0..iterations {
        let r: Vec<f64> = m.matvec(&x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
        axpy(-alpha, &m.t_matvec(&r), &mut x);
        out.push(x.clone());
    }
    out
}

/// Randomized Kaczmarz with averaging over a given row list:
/// `x − α (1/R) Σ_r p_r⁻¹ A_rᵀ (A_r x − b_r)`.
pub fn rk_averaging_step(
    m: &SqMatrix,
    b: &[f64],
    x: &[f64],
    rows: &[usize],
    alpha: f64,
) -> Vec<f64> {
    let mut out = x.to_vec();
    let scale = alpha / rows.len() as f64;
    for &r in rows {
        let row = m.row(r);
        let coeff = (dot(row, x) - b[r]) / m.row_prob(r);
        axpy(-scale * coeff, row, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Equal,
    AtMost,
}

/// One compared quantity. Matrices are flattened row-major.
#[derive(Clone, Debug)]
pub struct MomentCheck {
    pub label: &'static str,
    pub relation: Relation,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// For equalities `max |lhs − rhs|`; for bounds `max (lhs − rhs)`, which
    /// is nonpositive when the bound holds.
    pub max_abs_diff: f64,
}

impl MomentCheck {
    fn new(label: &'static str, relation: Relation, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let diffs = lhs.iter().zip(&rhs).map(|(l, r)| l - r);
        let max_abs_diff = match relation {
            Relation::Equal => diffs.map(f64::abs).fold(0.0, f64::max),
            Relation::AtMost => diffs.fold(f64::NEG_INFINITY, f64::max),
        };
        Self {
            label,
            relation,
            lhs,
            rhs,
            max_abs_diff,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_abs_diff <= tol
    }
}

#[derive(Clone, Debug, Default)]
pub struct MomentReport {
    pub checks: Vec<MomentCheck>,
}

impl MomentReport {
    /// Equalities within `eq_tol`, bounds with zero slack.
    pub fn all_hold(&self, eq_tol: f64) -> bool {
        self.checks.iter().all(|c| match c.relation {
            Relation::Equal => c.holds(eq_tol),
            Relation::AtMost => c.holds(0.0),
        })
    }

    /// Largest equality discrepancy.
    pub fn max_abs_diff(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.relation == Relation::Equal)
            .map(|c| c.max_abs_diff)
            .fold(0.0, f64::max)
    }

    pub fn get(&self, label: &str) -> Option<&MomentCheck> {
        self.checks.iter().find(|c| c.label == label)
    }
}

/// Calls `f(tuple, weight)` for every tuple in `{0..base}^len` with nonzero weight.
fn for_each_tuple(probs: &[f64], len: usize, mut f: impl FnMut(&[usize], f64)) {
    let base = probs.len();
    let mut idx = vec![0usize; len];
    loop {
        let w: f64 = idx.iter().map(|&i| probs[i]).product();
        if w > 0.0 {
            f(&idx, w);
        }
        let mut k = 0;
        loop {
            if k == len {
                return;
            }
            idx[k] += 1;
            if idx[k] < base {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn to_dmatrix(m: &SqMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), m.entries())
}

/// `‖A‖²` from the eigenvalues of `AᵀA`.
pub fn spectral_norm_sq(m: &SqMatrix) -> f64 {
    let a = to_dmatrix(m);
    let gram = a.transpose() * &a;
    gram.symmetric_eigenvalues().max()
}

/// Approximate matrix multiplication by `S` sampled outer products,
/// `Z = (1/S) Σ_s p_s⁻¹ X e_s e_sᵀ Y`, checked by enumeration:
/// `E[Z] = XY` and
/// `E‖XY − Z‖_F² = (1/S)(Σ_i ‖Xe_i‖² ‖e_iᵀY‖² / p_i − ‖XY‖_F²)`.
pub fn check_amm_variance(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    probs: &[f64],
    samples: usize,
) -> Result<MomentReport> {
    let inner = x.ncols();
    if y.nrows() != inner || probs.len() != inner {
        return Err(Error::InvalidInput("inner dimensions disagree".into()));
    }
    if inner == 0 || inner > 16 || samples == 0 || (inner as f64).powi(samples as i32) > 1e6 {
        return Err(Error::InvalidInput(format!(
            "enumeration over {inner}^{samples} outcomes is out of range"
        )));
    }
    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(
            "probabilities must be nonnegative and sum to one".into(),
        ));
    }
    let weights: Vec<f64> = (0..inner)
        .map(|i| x.column(i).norm_squared() * y.row(i).norm_squared())
        .collect();
    if let Some(i) = (0..inner).find(|&i| probs[i] == 0.0 && weights[i] > 0.0) {
        return Err(Error::InvalidInput(format!(
            "outcome {i} has zero probability but a nonzero contribution"
        )));
    }

    let xy = x * y;
    let mut mean = DMatrix::<f64>::zeros(xy.nrows(), xy.ncols());
    let mut second = 0.0;
    for_each_tuple(probs, samples, |tuple, w| {
        let mut z = DMatrix::<f64>::zeros(xy.nrows(), xy.ncols());
        for &s in tuple {
            z += (x.column(s) * y.row(s)) / (probs[s] * samples as f64);
        }
        second += w * (&xy - &z).norm_squared();
        mean += z * w;
    });

    let formula = ((0..inner)
        .filter(|&i| probs[i] > 0.0)
        .map(|i| weights[i] / probs[i])
        .sum::<f64>()
        - xy.norm_squared())
        / samples as f64;

    Ok(MomentReport {
        checks: vec![
            MomentCheck::new("E[Z] = XY", Relation::Equal, flat(&mean), flat(&xy)),
            MomentCheck::new(
                "E|XY - Z|_F^2",
                Relation::Equal,
                vec![second],
                vec![formula],
            ),
        ],
    })
}

/// Row-batch moments of `M = (1/R) Σ_r p_r⁻¹ A_rᵀ A_r`:
/// `E[M] = AᵀA` and `E[M²] = R⁻¹ ‖A‖_F² AᵀA + (1 − R⁻¹)(AᵀA)²`.
pub fn check_mk_moments(m: &SqMatrix, row_batch: usize) -> Result<MomentReport> {
    if m.nrows() > 8 || !(1..=3).contains(&row_batch) {
        return Err(Error::InvalidInput(format!(
            "enumeration needs n ≤ 8 and 1 ≤ R ≤ 3, got n = {}, R = {row_batch}",
            m.nrows()
        )));
    }
    let a = to_dmatrix(m);
    let probs: Vec<f64> = (0..m.nrows()).map(|r| m.row_prob(r)).collect();
    let outer: Vec<DMatrix<f64>> = (0..m.nrows())
        .map(|r| {
            let row = a.row(r);
            row.transpose() * row
        })
        .collect();

    let d = m.ncols();
    let mut e_m = DMatrix::<f64>::zeros(d, d);
    let mut e_m2 = DMatrix::<f64>::zeros(d, d);
    for_each_tuple(&probs, row_batch, |tuple, w| {
        let mut mk = DMatrix::<f64>::zeros(d, d);
        for &r in tuple {
            mk += &outer[r] / (probs[r] * row_batch as f64);
        }
        e_m2 += (&mk * &mk) * w;
        e_m += mk * w;
    });

    let gram = a.transpose() * &a;
    let inv_r = 1.0 / row_batch as f64;
    let rhs2 = &gram * (inv_r * m.frob_sq()) + (&gram * &gram) * (1.0 - inv_r);

    Ok(MomentReport {
        checks: vec![
            MomentCheck::new("E[M] = A^T A", Relation::Equal, flat(&e_m), flat(&gram)),
            MomentCheck::new("E[M^2]", Relation::Equal, flat(&e_m2), flat(&rhs2)),
        ],
    })
}

/// Enumerates every `(rows, cols)` batch for a fixed iterate `x` and checks
///
/// * `E[Mx − z | rows] = 0`,
/// * `E‖Mx − z‖² ≤ (‖A‖_F⁴/(RC) + ‖A‖_F²‖A‖²/C) ‖x‖²`,
/// * `E‖Du‖² ≤ (‖A‖_F⁴/(RC) + ‖A‖_F²‖A‖²/R + ‖A‖⁴) ‖x‖²`,
/// * `E‖Dv‖² ≤ ‖A‖_F²‖b‖²/R + ‖A‖²‖b‖²`,
///
/// where `z` and `u` use the column-sampled estimate of `A_r x` and `v` is the
/// row-sampled image of `b`.
pub fn check_variance_bounds(
    m: &SqMatrix,
    x: &[f64],
    b: &[f64],
    row_batch: usize,
    col_batch: usize,
) -> Result<MomentReport> {
    let (n, d) = (m.nrows(), m.ncols());
    if n > 6 || d > 6 || !(1..=2).contains(&row_batch) || !(1..=2).contains(&col_batch) {
        return Err(Error::InvalidInput(format!(
            "enumeration needs n, d ≤ 6 and R, C ∈ {{1, 2}}; got {n}x{d}, R = {row_batch}, C = {col_batch}"
        )));
    }
    if x.len() != d || b.len() != n {
        return Err(Error::InvalidInput(
            "vector dimensions disagree with the matrix".into(),
        ));
    }

    let a = to_dmatrix(m);
    let xv = DVector::from_column_slice(x);
    let row_probs: Vec<f64> = (0..n).map(|r| m.row_prob(r)).collect();
    let col_probs: Vec<f64> = (0..d).map(|c| m.col_prob(c)).collect();
    let row_norms: Vec<f64> = (0..n).map(|r| m.row_sqnorm(r).sqrt()).collect();
    let inv_r = 1.0 / row_batch as f64;
    let inv_c = 1.0 / col_batch as f64;

    let mut cond_mean_err: f64 = 0.0;
    let mut e_mz = 0.0;
    let mut e_du = 0.0;
    let mut e_dv = 0.0;

    for_each_tuple(&row_probs, row_batch, |rows, w_rows| {
        let mut mx = DVector::<f64>::zeros(d);
        let mut dv = DVector::<f64>::zeros(n);
        for &r in rows {
            let ar = a.row(r).transpose();
            mx += &ar * (ar.dot(&xv) * inv_r / row_probs[r]);
            dv[r] += row_norms[r] * b[r] * inv_r / row_probs[r];
        }
        e_dv += w_rows * dv.norm_squared();

        let mut cond_mean = DVector::<f64>::zeros(d);
        for_each_tuple(&col_probs, col_batch, |cols, w_cols| {
            let mut z = DVector::<f64>::zeros(d);
            let mut du = DVector::<f64>::zeros(n);
            for &r in rows {
                let est: f64 = cols
                    .iter()
                    .map(|&c| a[(r, c)] * x[c] / col_probs[c])
                    .sum::<f64>()
                    * inv_c;
                z += a.row(r).transpose() * (est * inv_r / row_probs[r]);
                du[r] += row_norms[r] * est * inv_r / row_probs[r];
            }
            let diff = &mx - &z;
            cond_mean += &diff * w_cols;
            e_mz += w_rows * w_cols * diff.norm_squared();
            e_du += w_rows * w_cols * du.norm_squared();
        });
        cond_mean_err = cond_mean_err.max(cond_mean.amax());
    });

    let frob = m.frob_sq();
    let spec = spectral_norm_sq(m);
    let x_sq = xv.norm_squared();
    let b_sq = norm_sq(b);
    let rc = (row_batch * col_batch) as f64;

    let bound_mz = (frob * frob / rc + frob * spec * inv_c) * x_sq;
    let bound_du = (frob * frob / rc + frob * spec * inv_r + spec * spec) * x_sq;
    let bound_dv = frob * b_sq * inv_r + spec * b_sq;

    Ok(MomentReport {
        checks: vec![
            MomentCheck::new(
                "E[Mx - z | M] = 0",
                Relation::Equal,
                vec![cond_mean_err],
                vec![0.0],
            ),
            MomentCheck::new("E|Mx - z|^2", Relation::AtMost, vec![e_mz], vec![bound_mz]),
            MomentCheck::new("E|Du|^2", Relation::AtMost, vec![e_du], vec![bound_du]),
            MomentCheck::new("E|Dv|^2", Relation::AtMost, vec![e_dv], vec![bound_dv]),
        ],
    })
}
