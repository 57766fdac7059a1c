//! Seeded fixtures and small dense reference computations shared by the
//! integration tests. Nothing here goes through the library's own products.
#![allow(dead_code)]

use qinspired::{RandomStream, SparseIterate, SqMatrix};

/// Row-major `n × d` matrix with entries uniform in `[-1, 1)`.
pub fn uniform_entries(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed);
    (0..n * d).map(|_| 2.0 * rng.uniform() - 1.0).collect()
}

pub fn uniform_matrix(n: usize, d: usize, seed: u64) -> SqMatrix {
    SqMatrix::from_row_major(n, d, uniform_entries(n, d, seed)).unwrap()
}

pub fn uniform_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed);
    (0..len).map(|_| 2.0 * rng.uniform() - 1.0).collect()
}

/// `nnz` distinct indices below `n`, each with a uniform value in `[-1, 1)`.
pub fn sparse_y(n: usize, nnz: usize, seed: u64) -> SparseIterate {
    let mut rng = RandomStream::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..nnz {
        let j = i + (rng.uniform() * (n - i) as f64) as usize;
        idx.swap(i, j.min(n - 1));
    }
    SparseIterate::from_entries(idx[..nnz].iter().map(|&i| (i, 2.0 * rng.uniform() - 1.0)))
}

pub fn entry(m: &SqMatrix, r: usize, c: usize) -> f64 {
    m.query_entry(r, c).unwrap()
}

pub fn dense_mul(m: &SqMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| entry(m, r, c) * x[c]).sum())
        .collect()
}

pub fn dense_tmul(m: &SqMatrix, y: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|c| (0..m.nrows()).map(|r| entry(m, r, c) * y[r]).sum())
        .collect()
}

pub fn row_norms_sq(m: &SqMatrix) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| entry(m, r, c).powi(2)).sum())
        .collect()
}

pub fn col_norms_sq(m: &SqMatrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|c| (0..m.nrows()).map(|r| entry(m, r, c).powi(2)).sum())
        .collect()
}

pub fn normalize(w: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Empirical frequencies of `draws` over `0..len`.
pub fn frequencies(draws: &[usize], len: usize) -> Vec<f64> {
    let mut counts = vec![0.0; len];
    for &i in draws {
        counts[i] += 1.0;
    }
    counts.iter().map(|c| c / draws.len() as f64).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson statistic of observed counts against expected probabilities.
pub fn chi_square(draws: &[usize], probs: &[f64]) -> f64 {
    let n = draws.len() as f64;
    let freq = frequencies(draws, probs.len());
    probs
        .iter()
        .zip(freq)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, f)| n * (f - p).powi(2) / p)
        .sum()
}
