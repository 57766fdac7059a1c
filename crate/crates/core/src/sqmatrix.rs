//! Dense matrix with sample-and-query access.
//!
//! Besides entry reads, the wrapper answers three kinds of draws at
//! `O(log dim)` cost each: a row with probability `p_r = ‖A_r‖² / ‖A‖_F²`, a
//! column with probability `q_c = ‖A e_c‖² / ‖A‖_F²`, and a column within a
//! fixed row `r` with probability `A[r][c]² / ‖A_r‖²`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sampling::PrefixSampler;

#[derive(Debug)]
pub struct SqMatrix {
    n: usize,
    d: usize,
    entries: Vec<f64>,
    row_sqnorms: Vec<f64>,
    col_sqnorms: Vec<f64>,
    frob_sq: f64,
    row_sampler: PrefixSampler,
    col_sampler: PrefixSampler,
    row_entry_samplers: Vec<OnceLock<Option<PrefixSampler>>>,
}

impl SqMatrix {
    /// Builds from row-major storage of an `n × d` matrix.
    pub fn from_row_major(n: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {n}x{d}"
            )));
        }
        if entries.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {n}x{d} matrix, got {}",
                n * d,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }

        let mut row_sqnorms = vec![0.0; n];
        let mut col_sqnorms = vec![0.0; d];
        for (r, row) in entries.chunks_exact(d).enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let v2 = v * v;
                row_sqnorms[r] += v2;
                col_sqnorms[c] += v2;
            }
        }
        let frob_sq: f64 = row_sqnorms.iter().sum();
        if frob_sq == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let row_sampler =
            PrefixSampler::new(row_sqnorms.iter().copied()).ok_or(Error::ZeroMatrix)?;
        let col_sampler =
            PrefixSampler::new(col_sqnorms.iter().copied()).ok_or(Error::ZeroMatrix)?;

        Ok(Self {
            n,
            d,
            entries,
            row_sqnorms,
            col_sqnorms,
            frob_sq,
            row_sampler,
            col_sampler,
            row_entry_samplers: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Builds from a list of equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has length {}, expected {d}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(n, d, entries)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::from_row_major(n, n, entries)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    /// Checked entry query.
    pub fn query_entry(&self, r: usize, c: usize) -> Result<f64> {
        if r >= self.n {
            return Err(Error::IndexOutOfRange {
                index: r,
                len: self.n,
            });
        }
        if c >= self.d {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: self.d,
            });
        }
        Ok(self.entries[r * self.d + c])
    }

    /// Unchecked (panicking) entry read for hot loops.
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.d + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.d..(r + 1) * self.d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sqnorms(&self) -> &[f64] {
        &self.row_sqnorms
    }

    pub fn col_sqnorms(&self) -> &[f64] {
        &self.col_sqnorms
    }

    #[inline]
    pub fn row_sqnorm(&self, r: usize) -> f64 {
        self.row_sqnorms[r]
    }

    #[inline]
    pub fn col_sqnorm(&self, c: usize) -> f64 {
        self.col_sqnorms[c]
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    /// `p_r`, the probability of drawing row `r`.
    #[inline]
    pub fn row_prob(&self, r: usize) -> f64 {
        self.row_sqnorms[r] / self.frob_sq
    }

    /// `q_c`, the probability of drawing column `c`.
    #[inline]
    pub fn col_prob(&self, c: usize) -> f64 {
        self.col_sqnorms[c] / self.frob_sq
    }

    pub fn row_cdf(&self) -> &[f64] {
        self.row_sampler.cumulative()
    }

    pub fn col_cdf(&self) -> &[f64] {
        self.col_sampler.cumulative()
    }

    pub fn sample_row(&self, rng: &mut RandomStream) -> usize {
        self.row_sampler.sample(rng)
    }

    pub fn sample_col(&self, rng: &mut RandomStream) -> usize {
        self.col_sampler.sample(rng)
    }

    /// Column `c` of row `r` with probability `A[r][c]² / ‖A_r‖²`.
    pub fn sample_entry_in_row(&self, r: usize, rng: &mut RandomStream) -> Result<usize> {
        if r >= self.n {
            return Err(Error::IndexOutOfRange {
                index: r,
                len: self.n,
            });
        }
        let sampler = self.row_entry_samplers[r]
            .get_or_init(|| PrefixSampler::new(self.row(r).iter().map(|v| v * v)));
        sampler
            .as_ref()
            .map(|s| s.sample(rng))
            .ok_or(Error::ZeroRow(r))
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "matvec dimension mismatch");
        self.entries
            .chunks_exact(self.d)
            .map(|row| dot(row, x))
            .collect()
    }

    /// `Aᵀ y` for dense `y`.
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n, "t_matvec dimension mismatch");
        let mut out = vec![0.0; self.d];
        for (row, &yi) in self.entries.chunks_exact(self.d).zip(y) {
            if yi != 0.0 {
                axpy(yi, row, &mut out);
            }
        }
        out
    }

    /// `‖A‖²` estimated by power iteration on `AᵀA` from a random start.
    ///
    /// The returned Rayleigh quotient `‖A v‖² / ‖v‖²` is nondecreasing in
    /// `iters` in exact arithmetic.
    pub fn estimate_spectral_norm(&self, iters: usize, rng: &mut RandomStream) -> f64 {
        let mut v: Vec<f64> = (0..self.d).map(|_| rng.standard_normal()).collect();
        normalize(&mut v);
        let mut estimate = norm_sq(&self.matvec(&v));
        for _ in 0..iters {
            let w = self.t_matvec(&self.matvec(&v));
            let nw = norm_sq(&w).sqrt();
            if nw == 0.0 {
                break;
            }
            v = w.into_iter().map(|x| x / nw).collect();
            estimate = norm_sq(&self.matvec(&v));
        }
        estimate
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn normalize(x: &mut [f64]) {
    let n = norm_sq(x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}
