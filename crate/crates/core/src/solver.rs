//! Row/column sub-sampled stochastic gradient iteration on the dual vector.
//!
//! The iterate is a sparse `y ∈ R^n` with the primal approximation `x = Aᵀy`.
//! Each step draws an ordered list of `C` columns (shared by every row) and an
//! ordered list of `R` rows, then applies
//!
//! ```text
//! y_r ← y_r − α γ_r / (R p_r)      for each r in rows
//! γ_r = (1/C) Σ_{c ∈ cols} q_c⁻¹ A[r][c] β_c − b_r,   β_c = Σ_i A[i][c] y_i
//! ```
//!
//! Conditioned on the row draw the step is randomized Kaczmarz with
//! averaging; in full expectation it is gradient descent on `‖Ax − b‖²`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::outaccess::CompressedSolution;
use crate::rng::RandomStream;
use crate::sqmatrix::{dot, SqMatrix};

/// Step size, batch sizes and iteration count, plus the conditioning they
/// were derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub alpha: f64,
    /// `R`, rows drawn per step.
    pub row_batch: usize,
    /// `C`, columns drawn per step.
    pub col_batch: usize,
    /// `K`, number of steps.
    pub iterations: usize,
    pub eps: f64,
    /// `κ² = ‖A‖² ‖A⁺‖²`
    pub kappa_sq: f64,
    /// `κ_F² = ‖A‖_F² ‖A⁺‖²`
    pub kappa_f_sq: f64,
}

impl SolverParams {
    /// Parameters that carry the accuracy guarantee `E‖x − x*‖² ≤ 2ε²‖x*‖²`:
    ///
    /// `α = 1/‖A‖²`, `R = ⌈2κ_F²/κ²⌉`, `C = ⌈10κ_F²/ε²⌉`, `K = ⌈4κ² ln(1/ε)⌉`.
    ///
    /// `spectral_sq` is `‖A‖²` when known or estimated; otherwise it is
    /// recovered from `‖A‖² = ‖A‖_F² κ² / κ_F²`.
    pub fn from_conditioning(
        m: &SqMatrix,
        eps: f64,
        kappa_sq: f64,
        kappa_f_sq: f64,
        spectral_sq: Option<f64>,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0, 1/4], got {eps}"
            )));
        }
        if !(kappa_sq.is_finite() && kappa_sq >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "kappa^2 must be finite and at least 1, got {kappa_sq}"
            )));
        }
        // κ_F² ≥ κ² holds exactly; allow a few ulps of slack from computed inputs.
        if !(kappa_f_sq.is_finite() && kappa_f_sq >= kappa_sq * (1.0 - 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "kappa_F^2 ({kappa_f_sq}) must be at least kappa^2 ({kappa_sq})"
            )));
        }
        let spectral_sq = match spectral_sq {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => {
                return Err(Error::InvalidInput(format!(
                    "spectral norm squared must be positive, got {s}"
                )))
            }
            None => m.frob_sq() * kappa_sq / kappa_f_sq,
        };
        Ok(Self {
            alpha: 1.0 / spectral_sq,
            row_batch: ceil_count(2.0 * kappa_f_sq / kappa_sq),
            col_batch: ceil_count(10.0 * kappa_f_sq / (eps * eps)),
            iterations: ceil_count(4.0 * kappa_sq * (1.0 / eps).ln()),
            eps,
            kappa_sq,
            kappa_f_sq,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step size must be positive, got {}",
                self.alpha
            )));
        }
        if self.row_batch == 0 || self.col_batch == 0 {
            return Err(Error::InvalidInput(
                "row and column batch sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn ceil_count(x: f64) -> usize {
    (x.ceil() as usize).max(1)
}

/// The dual iterate `y`, stored sparsely.
///
/// Entries that cancel to exactly zero stay in the map, so `nnz()` counts
/// every index ever touched.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseIterate {
    nz: BTreeMap<usize, f64>,
    iteration_count: usize,
}

impl SparseIterate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Self {
        let mut y = Self::new();
        for (i, v) in entries {
            *y.nz.entry(i).or_insert(0.0) += v;
        }
        y
    }

    pub fn nnz(&self) -> usize {
        self.nz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nz.is_empty()
    }

    pub fn iteration_count(&self) -> usize {
        self.iteration_count
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nz.get(&i).copied().unwrap_or(0.0)
    }

    /// Stored entries in increasing index order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        self.nz.iter().map(|(&i, &v)| (i, v))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.nz.keys().next_back().copied()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    fn add(&mut self, i: usize, delta: f64) -> f64 {
        let slot = self.nz.entry(i).or_insert(0.0);
        *slot += delta;
        *slot
    }
}

/// Ordered index lists drawn for one step. Duplicates are kept.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchDraw {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// How `(e_rᵀA) x` is estimated inside a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ColumnEstimator {
    /// Importance-sampled columns, shared across the row batch.
    #[default]
    Sampled,
    /// Exact inner products; the step reduces to randomized Kaczmarz with
    /// averaging. Used as a reference, not by [`solve`].
    Exact,
}

/// Draws the step's columns (for [`ColumnEstimator::Sampled`]) and then its rows.
pub fn draw_batch(
    m: &SqMatrix,
    p: &SolverParams,
    estimator: ColumnEstimator,
    rng: &mut RandomStream,
) -> BatchDraw {
    let cols = match estimator {
        ColumnEstimator::Sampled => (0..p.col_batch).map(|_| m.sample_col(rng)).collect(),
        ColumnEstimator::Exact => Vec::new(),
    };
    let rows = (0..p.row_batch).map(|_| m.sample_row(rng)).collect();
    BatchDraw { rows, cols }
}

/// Applies the update for a given draw. Does not touch `iteration_count`.
pub fn apply_batch(
    m: &SqMatrix,
    b: &[f64],
    y: &mut SparseIterate,
    alpha: f64,
    draw: &BatchDraw,
    estimator: ColumnEstimator,
) -> Result<()> {
    check_rhs(m, b)?;
    if draw.rows.is_empty() {
        return Err(Error::InvalidInput("row batch is empty".into()));
    }
    if let Some(&r) = draw.rows.iter().find(|&&r| r >= m.nrows()) {
        return Err(Error::IndexOutOfRange {
            index: r,
            len: m.nrows(),
        });
    }
    if let Some(&c) = draw.cols.iter().find(|&&c| c >= m.ncols()) {
        return Err(Error::IndexOutOfRange {
            index: c,
            len: m.ncols(),
        });
    }

    let residual: Box<dyn Fn(usize) -> f64> = match estimator {
        ColumnEstimator::Sampled => {
            if draw.cols.is_empty() {
                return Err(Error::InvalidInput("column batch is empty".into()));
            }
            let weighted = column_terms(m, y, &draw.cols);
            Box::new(move |r: usize| {
                let row = m.row(r);
                weighted.iter().map(|&(c, w)| row[c] * w).sum::<f64>() - b[r]
            })
        }
        ColumnEstimator::Exact => {
            let x = primal(m, y);
            Box::new(move |r: usize| dot(m.row(r), &x) - b[r])
        }
    };

    // Every γ_r is a function of y_k only, so computing them up front is
    // equivalent to the sequential row loop.
    let scale = alpha / draw.rows.len() as f64;
    let updates: Vec<(usize, f64)> = draw
        .rows
        .iter()
        .map(|&r| (r, -scale * residual(r) / m.row_prob(r)))
        .collect();
    for (r, delta) in updates {
        if !y.add(r, delta).is_finite() {
            return Err(Error::NonFinite(r));
        }
    }
    Ok(())
}

/// For each distinct column in `cols`: `(c, (count_c / C) q_c⁻¹ β_c)`.
fn column_terms(m: &SqMatrix, y: &SparseIterate, cols: &[usize]) -> Vec<(usize, f64)> {
    let mut sorted = cols.to_vec();
    sorted.sort_unstable();
    let inv_c = 1.0 / cols.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let c = sorted[i];
        let mut count = 0usize;
        while i < sorted.len() && sorted[i] == c {
            count += 1;
            i += 1;
        }
        let beta: f64 = y.iter().map(|(r, yr)| m.at(r, c) * yr).sum();
        out.push((c, count as f64 * inv_c * beta / m.col_prob(c)));
    }
    out
}

fn primal(m: &SqMatrix, y: &SparseIterate) -> Vec<f64> {
    let mut x = vec![0.0; m.ncols()];
    for (r, yr) in y.iter() {
        for (xj, a) in x.iter_mut().zip(m.row(r)) {
            *xj += a * yr;
        }
    }
    x
}

fn check_rhs(m: &SqMatrix, b: &[f64]) -> Result<()> {
    if b.len() != m.nrows() {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.nrows()
        )));
    }
    if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    Ok(())
}

/// One iteration with sampled columns. Returns the draw that was used.
pub fn step(
    m: &SqMatrix,
    b: &[f64],
    y: &mut SparseIterate,
    p: &SolverParams,
    rng: &mut RandomStream,
) -> Result<BatchDraw> {
    step_with(m, b, y, p, ColumnEstimator::Sampled, rng)
}

pub fn step_with(
    m: &SqMatrix,
    b: &[f64],
    y: &mut SparseIterate,
    p: &SolverParams,
    estimator: ColumnEstimator,
    rng: &mut RandomStream,
) -> Result<BatchDraw> {
    p.validate()?;
    let draw = draw_batch(m, p, estimator, rng);
    apply_batch(m, b, y, p.alpha, &draw, estimator)?;
    y.iteration_count += 1;
    Ok(draw)
}

/// Runs `p.iterations` steps from `y = 0`.
pub fn solve<'m>(
    m: &'m SqMatrix,
    b: &[f64],
    p: &SolverParams,
    rng: &mut RandomStream,
) -> Result<CompressedSolution<'m>> {
    solve_with(m, b, p, rng, |_, _, _| {})
}

/// Like [`solve`], calling `observe(k, y_k, draw)` after each step `k = 1..=K`.
pub fn solve_with<'m, F>(
    m: &'m SqMatrix,
    b: &[f64],
    p: &SolverParams,
    rng: &mut RandomStream,
    mut observe: F,
) -> Result<CompressedSolution<'m>>
where
    F: FnMut(usize, &SparseIterate, &BatchDraw),
{
    p.validate()?;
    check_rhs(m, b)?;
    let mut y = SparseIterate::new();
    for k in 1..=p.iterations {
        let draw = step(m, b, &mut y, p, rng)?;
        observe(k, &y, &draw);
    }
    CompressedSolution::new(m, y)
}
