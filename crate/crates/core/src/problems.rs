//! Synthetic consistent systems with a prescribed singular spectrum.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mtx;
use crate::rng::RandomStream;
use crate::sqmatrix::SqMatrix;

/// `A = U Σ Vᵀ` with Haar-distributed orthonormal `U`, `V`, and a planted
/// minimum-norm solution `x* = V w`, `b = A x*`.
#[derive(Debug)]
pub struct GeneratedProblem {
    pub matrix: SqMatrix,
    pub b: Vec<f64>,
    pub x_star: Vec<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub kappa_sq: f64,
    pub kappa_f_sq: f64,
    /// `n × k`, orthonormal columns.
    pub left: DMatrix<f64>,
    /// `d × k`, orthonormal columns.
    pub right: DMatrix<f64>,
}

/// `[1 + ρ_i]` with `ρ` geometrically spaced from `lo` to `hi` inclusive,
/// returned in descending order. A single point uses `hi`.
pub fn geometric_spectrum(count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidInput(
            "spectrum needs at least one value".into(),
        ));
    }
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need 0 < lo <= hi, got lo = {lo}, hi = {hi}"
        )));
    }
    if count == 1 {
        return Ok(vec![1.0 + hi]);
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count)
        .rev()
        .map(|i| {
            let rho = if i == count - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            };
            1.0 + rho
        })
        .collect())
}

/// `(κ², κ_F²)` of a spectrum of nonzero singular values.
pub fn condition_numbers(spectrum: &[f64]) -> (f64, f64) {
    let max = spectrum.iter().copied().fold(0.0, f64::max);
    let min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_sq: f64 = spectrum.iter().map(|s| s * s).sum();
    ((max * max) / (min * min), sum_sq / (min * min))
}

fn haar_orthonormal(rows: usize, cols: usize, rng: &mut RandomStream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| 0.0).map(|_: f64| rng.standard_normal());
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix column signs so the distribution is exactly Haar.
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn generate(
    n: usize,
    d: usize,
    spectrum: &[f64],
    rng: &mut RandomStream,
) -> Result<GeneratedProblem> {
    let k = spectrum.len();
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidInput(format!(
            "spectrum length {k} must be between 1 and min(n, d) = {}",
            n.min(d)
        )));
    }
    if let Some(s) = spectrum.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "singular values must be positive, got {s}"
        )));
    }
    let mut sv = spectrum.to_vec();
    sv.sort_by(|a, b| b.total_cmp(a));

    let left = haar_orthonormal(n, k, rng);
    let right = haar_orthonormal(d, k, rng);
    let w: Vec<f64> = (0..k).map(|_| rng.standard_normal()).collect();

    let mut scaled_left = left.clone();
    for (j, s) in sv.iter().enumerate() {
        scaled_left.column_mut(j).scale_mut(*s);
    }
    let a = &scaled_left * right.transpose();
    let matrix = SqMatrix::from_row_major(n, d, a.transpose().as_slice().to_vec())?;

    let x_star: Vec<f64> = (&right * nalgebra::DVector::from_vec(w))
        .as_slice()
        .to_vec();
    let b = matrix.matvec(&x_star);
    let (kappa_sq, kappa_f_sq) = condition_numbers(&sv);

    Ok(GeneratedProblem {
        matrix,
        b,
        x_star,
        singular_values: sv,
        kappa_sq,
        kappa_f_sq,
        left,
        right,
    })
}

impl GeneratedProblem {
    pub fn spectral_sq(&self) -> f64 {
        self.singular_values[0].powi(2)
    }

    /// `A⁺ rhs = V Σ⁻¹ Uᵀ rhs` from the stored factors.
    pub fn factor_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(rhs);
        let mut coeffs = self.left.transpose() * rhs;
        for (c, s) in coeffs.iter_mut().zip(&self.singular_values) {
            *c /= s;
        }
        (&self.right * coeffs).as_slice().to_vec()
    }

    /// Writes `A.mtx`, `b.mtx`, `xstar.mtx` and `meta.txt` into `dir`.
    pub fn write_to_dir(&self, dir: &Path, meta: &ProblemMeta) -> Result<()> {
        fs::create_dir_all(dir)?;
        mtx::write_matrix(
            dir.join("A.mtx"),
            self.matrix.nrows(),
            self.matrix.ncols(),
            self.matrix.entries(),
        )?;
        mtx::write_vector(dir.join("b.mtx"), &self.b)?;
        mtx::write_vector(dir.join("xstar.mtx"), &self.x_star)?;
        fs::write(dir.join("meta.txt"), meta.to_text())?;
        Ok(())
    }

    pub fn meta(&self, seed: u64, spec_lo: f64, spec_hi: f64) -> ProblemMeta {
        ProblemMeta {
            n: self.matrix.nrows(),
            d: self.matrix.ncols(),
            rank: self.singular_values.len(),
            seed,
            spec_lo,
            spec_hi,
            kappa_sq: self.kappa_sq,
            kappa_f_sq: self.kappa_f_sq,
            spectral_sq: self.spectral_sq(),
            frob_sq: self.matrix.frob_sq(),
            singular_values: self.singular_values.clone(),
        }
    }
}

/// Sidecar metadata written next to a generated problem.
///
/// Text format: one `key = value` per line; `singular_values` is a
/// comma-separated list. Floats carry 17 significant digits.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemMeta {
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub seed: u64,
    pub spec_lo: f64,
    pub spec_hi: f64,
    pub kappa_sq: f64,
    pub kappa_f_sq: f64,
    pub spectral_sq: f64,
    pub frob_sq: f64,
    pub singular_values: Vec<f64>,
}

impl ProblemMeta {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "rank = {}", self.rank);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "spec_lo = {:.16e}", self.spec_lo);
        let _ = writeln!(s, "spec_hi = {:.16e}", self.spec_hi);
        let _ = writeln!(s, "kappa_sq = {:.16e}", self.kappa_sq);
        let _ = writeln!(s, "kappa_f_sq = {:.16e}", self.kappa_f_sq);
        let _ = writeln!(s, "spectral_sq = {:.16e}", self.spectral_sq);
        let _ = writeln!(s, "frob_sq = {:.16e}", self.frob_sq);
        let sv: Vec<String> = self
            .singular_values
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
        let _ = writeln!(s, "singular_values = {}", sv.join(","));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected 'key = value'".into(),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn field<T: std::str::FromStr>(
            kv: &std::collections::HashMap<String, String>,
            key: &str,
        ) -> Result<T> {
            kv.get(key)
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("missing key '{key}'"),
                })?
                .parse()
                .map_err(|_| Error::Parse {
                    line: 0,
                    msg: format!("bad value for '{key}'"),
                })
        }
        let singular_values = kv
            .get("singular_values")
            .map(|s| {
                s.split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .transpose()
            .map_err(|_| Error::Parse {
                line: 0,
                msg: "bad singular_values".into(),
            })?
            .unwrap_or_default();
        Ok(Self {
            n: field(&kv, "n")?,
            d: field(&kv, "d")?,
            rank: field(&kv, "rank")?,
            seed: field(&kv, "seed")?,
            spec_lo: field(&kv, "spec_lo")?,
            spec_hi: field(&kv, "spec_hi")?,
            kappa_sq: field(&kv, "kappa_sq")?,
            kappa_f_sq: field(&kv, "kappa_f_sq")?,
            spectral_sq: field(&kv, "spectral_sq")?,
            frob_sq: field(&kv, "frob_sq")?,
            singular_values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_examples() {
        let s = geometric_spectrum(3, 1.0, 4.0).unwrap();
        assert_eq!(s.len(), 3);
        for (a, b) in s.iter().zip([5.0, 3.0, 2.0]) {
            assert!((a - b).abs() < 1e-14, "{s:?}");
        }
        assert_eq!(geometric_spectrum(1, 0.5, 2.0).unwrap(), vec![3.0]);
        assert!(geometric_spectrum(0, 1.0, 2.0).is_err());
        assert!(geometric_spectrum(3, 0.0, 2.0).is_err());
        assert!(geometric_spectrum(3, 3.0, 2.0).is_err());
    }

    #[test]
    fn reported_spectrum_conditioning() {
        let s = geometric_spectrum(100, 1e-15, 9.0).unwrap();
        assert_eq!(s[0], 10.0);
        assert_eq!(*s.last().unwrap(), 1.0 + 1e-15);
        let (k2, kf2) = condition_numbers(&s);
        assert!((k2 - 100.0).abs() < 1e-9);
        assert!((kf2 - 312.7).abs() < 0.05, "{kf2}");
    }

    #[test]
    fn scalar_problem() {
        let p = generate(1, 1, &[1.0], &mut RandomStream::new(1)).unwrap();
        assert!((p.matrix.at(0, 0).abs() - 1.0).abs() < 1e-15);
        assert_eq!((p.kappa_sq, p.kappa_f_sq), (1.0, 1.0));
    }

    #[test]
    fn factors_are_orthonormal() {
        let p = generate(7, 5, &[2.0, 1.0], &mut RandomStream::new(2)).unwrap();
        for f in [&p.left, &p.right] {
            let gram = f.transpose() * f;
            let err = (gram - DMatrix::<f64>::identity(2, 2)).amax();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn bad_spectra_are_rejected() {
        let mut rng = RandomStream::new(3);
        assert!(generate(3, 2, &[1.0, 1.0, 1.0], &mut rng).is_err());
        assert!(generate(3, 2, &[1.0, 0.0], &mut rng).is_err());
        assert!(generate(3, 2, &[], &mut rng).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let p = generate(6, 4, &[3.0, 1.5, 1.0], &mut RandomStream::new(4)).unwrap();
        let meta = p.meta(4, 0.5, 2.0);
        assert_eq!(ProblemMeta::parse(&meta.to_text()).unwrap(), meta);
        assert!(ProblemMeta::parse("n = 3\n").is_err());
    }
}
