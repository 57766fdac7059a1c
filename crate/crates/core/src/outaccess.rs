//! Entry queries and `|x_j|²`-proportional sampling for `x = Aᵀy`.
//!
//! Sampling is rejection sampling with proposal `P(j) ∝ Σ_i y_i² A[i][j]²`,
//! realized by drawing a row `i ∝ y_i² ‖A_i‖²` and then a column from that
//! row's entry distribution. A candidate `c` is accepted with probability
//!
//! ```text
//! r(c) = (Σ_i A[i][c] y_i)² / (nnz(y) Σ_i y_i² A[i][c]²)
//! ```
//!
//! which is at most one by Cauchy–Schwarz. The expected number of rounds is
//! `φ(y) = nnz(y) ‖Dy‖² / ‖Aᵀy‖²`, with `D = diag(‖A_i‖)`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sampling::PrefixSampler;
use crate::solver::SparseIterate;
use crate::sqmatrix::SqMatrix;

/// Below this `‖Aᵀy‖²` the target distribution is treated as undefined.
pub const DEGENERATE_NORM_SQ: f64 = 1e-300;

/// Rejection rounds allowed per sample, as a multiple of `⌈φ⌉`.
pub const ROUNDS_PER_PHI: usize = 100;

/// Outcome of one accepted draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats {
    pub accepted_index: usize,
    pub iterations_used: usize,
    pub phi_at_sample: f64,
}

#[derive(Debug)]
struct Proposal {
    rows: Vec<usize>,
    sampler: PrefixSampler,
}

/// A sparse dual vector together with the matrix it lives against.
#[derive(Debug)]
pub struct CompressedSolution<'m> {
    matrix: &'m SqMatrix,
    y: SparseIterate,
    x_sqnorm: OnceLock<f64>,
    proposal: OnceLock<Option<Proposal>>,
}

impl<'m> CompressedSolution<'m> {
    pub fn new(matrix: &'m SqMatrix, y: SparseIterate) -> Result<Self> {
        if let Some(i) = y.max_index().filter(|&i| i >= matrix.nrows()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: matrix.nrows(),
            });
        }
        if let Some((i, _)) = y.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            matrix,
            y,
            x_sqnorm: OnceLock::new(),
            proposal: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &'m SqMatrix {
        self.matrix
    }

    pub fn iterate(&self) -> &SparseIterate {
        &self.y
    }

    /// Mutable access to `y`; drops every cached quantity.
    pub fn iterate_mut(&mut self) -> &mut SparseIterate {
        self.x_sqnorm = OnceLock::new();
        self.proposal = OnceLock::new();
        &mut self.y
    }

    pub fn into_iterate(self) -> SparseIterate {
        self.y
    }

    pub fn nnz(&self) -> usize {
        self.y.nnz()
    }

    /// `x_j = Σ_r A[r][j] y_r`, using `nnz(y)` entry reads.
    pub fn query(&self, j: usize) -> Result<f64> {
        if j >= self.matrix.ncols() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.matrix.ncols(),
            });
        }
        Ok(self.column_dot(j))
    }

    #[inline]
    fn column_dot(&self, j: usize) -> f64 {
        self.y.iter().map(|(r, yr)| self.matrix.at(r, j) * yr).sum()
    }

    /// Dense `x = Aᵀy`.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.matrix.ncols()];
        for (r, yr) in self.y.iter() {
            for (xj, a) in x.iter_mut().zip(self.matrix.row(r)) {
                *xj += a * yr;
            }
        }
        x
    }

    /// `‖Aᵀy‖²`, computed once.
    pub fn x_sqnorm(&self) -> f64 {
        *self
            .x_sqnorm
            .get_or_init(|| self.to_dense().iter().map(|v| v * v).sum())
    }

    /// `‖Dy‖² = Σ_r y_r² ‖A_r‖²`.
    pub fn weighted_row_mass(&self) -> f64 {
        self.y
            .iter()
            .map(|(r, yr)| yr * yr * self.matrix.row_sqnorm(r))
            .sum()
    }

    fn nondegenerate_sqnorm(&self) -> Result<f64> {
        let xs = self.x_sqnorm();
        if !(xs > DEGENERATE_NORM_SQ) {
            return Err(Error::Degenerate(format!("‖Aᵀy‖² = {xs:e}")));
        }
        Ok(xs)
    }

    /// `φ(y) = nnz(y) Σ_r y_r² ‖A_r‖² / ‖Aᵀy‖²`.
    pub fn phi(&self) -> Result<f64> {
        let xs = self.nondegenerate_sqnorm()?;
        Ok(self.y.nnz() as f64 * self.weighted_row_mass() / xs)
    }

    /// Acceptance probability of candidate column `c`. Zero when every
    /// support row vanishes at `c`.
    pub fn acceptance_ratio(&self, c: usize) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (r, yr) in self.y.iter() {
            let a = self.matrix.at(r, c);
            num += a * yr;
            den += yr * yr * a * a;
        }
        if den == 0.0 {
            return 0.0;
        }
        num * num / (self.y.nnz() as f64 * den)
    }

    fn proposal(&self) -> Result<&Proposal> {
        self.proposal
            .get_or_init(|| {
                let (rows, weights): (Vec<usize>, Vec<f64>) = self
                    .y
                    .iter()
                    .map(|(r, yr)| (r, yr * yr * self.matrix.row_sqnorm(r)))
                    .unzip();
                PrefixSampler::new(weights).map(|sampler| Proposal { rows, sampler })
            })
            .as_ref()
            .ok_or_else(|| Error::Degenerate("proposal has zero total weight".into()))
    }

    /// Row-stage proposal probabilities `y_i² ‖A_i‖² / ‖Dy‖²` over the support.
    pub fn proposal_row_probs(&self) -> Result<Vec<(usize, f64)>> {
        let p = self.proposal()?;
        let total = p.sampler.total();
        let cdf = p.sampler.cumulative();
        Ok(p.rows
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let lo = if k == 0 { 0.0 } else { cdf[k - 1] };
                (r, (cdf[k] - lo) / total)
            })
            .collect())
    }

    /// One draw from the proposal `P`.
    pub fn sample_proposal(&self, rng: &mut RandomStream) -> Result<usize> {
        let p = self.proposal()?;
        let row = p.rows[p.sampler.sample(rng)];
        self.matrix.sample_entry_in_row(row, rng)
    }

    /// One draw from `D_x`, `Pr[j] = x_j² / ‖x‖²`.
    pub fn sample(&self, rng: &mut RandomStream) -> Result<SampleStats> {
        let phi = self.phi()?;
        let cap = ROUNDS_PER_PHI.saturating_mul((phi.ceil() as usize).max(1));
        for round in 1..=cap {
            let c = self.sample_proposal(rng)?;
            let ratio = self.acceptance_ratio(c);
            debug_assert!(ratio <= 1.0 + 1e-9, "acceptance ratio {ratio} exceeds one");
            if rng.uniform() < ratio {
                return Ok(SampleStats {
                    accepted_index: c,
                    iterations_used: round,
                    phi_at_sample: phi,
                });
            }
        }
        Err(Error::RejectionCap { cap, phi })
    }
}
