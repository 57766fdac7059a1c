mod common;

use common::*;
use nalgebra::DMatrix;
use qinspired::problems::{condition_numbers, generate, geometric_spectrum, ProblemMeta};
use qinspired::reference::exact_min_norm_solve;
use qinspired::RandomStream;

fn dense(m: &qinspired::SqMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), m.entries())
}

#[test]
fn spectrum_endpoints_and_order() {
    let s = geometric_spectrum(50, 1e-15, 9.0).unwrap();
    assert_eq!(s.len(), 50);
    assert_eq!(s[0], 10.0);
    assert_eq!(*s.last().unwrap(), 1.0 + 1e-15);
    assert!(s.windows(2).all(|w| w[0] > w[1]));
    // consecutive ρ ratios are constant
    let rho: Vec<f64> = s.iter().map(|v| v - 1.0).collect();
    let r0 = rho[10] / rho[11];
    assert!(((rho[20] / rho[21]) - r0).abs() / r0 < 1e-6);
    assert!(geometric_spectrum(0, 1e-15, 9.0).is_err());
    assert!(geometric_spectrum(3, 0.0, 9.0).is_err());
}

#[test]
fn hundred_value_spectrum_condition_numbers() {
    let (k2, kf2) = condition_numbers(&geometric_spectrum(100, 1e-15, 9.0).unwrap());
    assert!((k2 - 100.0).abs() < 1e-9);
    assert!((kf2 - 312.7).abs() < 0.1, "kappa_F^2 = {kf2}");
}

#[test]
fn generated_matrix_has_requested_spectrum() {
    for seed in 0..4 {
        let spectrum = geometric_spectrum(6, 1e-3, 4.0).unwrap();
        let p = generate(14, 9, &spectrum, &mut RandomStream::new(seed)).unwrap();
        let mut sv: Vec<f64> = dense(&p.matrix).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sv.iter().zip(&spectrum) {
            assert!((a - b).abs() / b < 1e-10, "seed {seed}: {a} vs {b}");
        }
        assert!(sv[6..].iter().all(|v| *v < 1e-12));

        let smin = sv[5];
        let k2 = sv[0].powi(2) / smin.powi(2);
        let kf2 = sv.iter().map(|s| s * s).sum::<f64>() / smin.powi(2);
        assert!((k2 - p.kappa_sq).abs() / k2 < 1e-10);
        assert!((kf2 - p.kappa_f_sq).abs() / kf2 < 1e-10);
        let sum_sq: f64 = spectrum.iter().map(|s| s * s).sum();
        assert!((p.matrix.frob_sq() - sum_sq).abs() / sum_sq < 1e-12);
    }
}

#[test]
fn planted_solution_is_consistent_and_minimal() {
    for seed in 0..4 {
        let spectrum = geometric_spectrum(5, 1e-15, 9.0).unwrap();
        let p = generate(12, 8, &spectrum, &mut RandomStream::new(seed)).unwrap();
        assert!(max_abs_diff(&dense_mul(&p.matrix, &p.x_star), &p.b) < 1e-10);
        assert!(max_abs_diff(&p.factor_solve(&p.b), &p.x_star) < 1e-10);
        let cg = exact_min_norm_solve(&p.matrix, &p.b).unwrap();
        assert!(max_abs_diff(&cg.x_star, &p.x_star) < 1e-8);
        // minimum norm: x* lies in the row space, so projecting onto it changes nothing
        let v = &p.right;
        let xs = nalgebra::DVector::from_column_slice(&p.x_star);
        let proj = v * (v.transpose() * &xs);
        assert!((proj - xs).amax() < 1e-12);
    }
}

#[test]
fn generation_is_seeded() {
    let s = geometric_spectrum(3, 0.1, 2.0).unwrap();
    let a = generate(6, 4, &s, &mut RandomStream::new(9)).unwrap();
    let b = generate(6, 4, &s, &mut RandomStream::new(9)).unwrap();
    let c = generate(6, 4, &s, &mut RandomStream::new(10)).unwrap();
    assert_eq!(a.matrix.entries(), b.matrix.entries());
    assert_eq!(a.b, b.b);
    assert_ne!(a.matrix.entries(), c.matrix.entries());
}

#[test]
fn rank_larger_than_dimensions_is_rejected() {
    let s = geometric_spectrum(5, 0.1, 2.0).unwrap();
    assert!(generate(4, 6, &s, &mut RandomStream::new(0)).is_err());
    assert!(generate(6, 4, &s, &mut RandomStream::new(0)).is_err());
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = geometric_spectrum(3, 0.5, 2.0).unwrap();
    let p = generate(5, 4, &s, &mut RandomStream::new(1)).unwrap();
    let meta = p.meta(1, 0.5, 2.0);
    p.write_to_dir(dir.path(), &meta).unwrap();
    let a = qinspired::mtx::read_matrix(dir.path().join("A.mtx")).unwrap();
    assert_eq!(a.entries, p.matrix.entries());
    assert_eq!(
        qinspired::mtx::read_vector(dir.path().join("b.mtx")).unwrap(),
        p.b
    );
    assert_eq!(
        qinspired::mtx::read_vector(dir.path().join("xstar.mtx")).unwrap(),
        p.x_star
    );
    let text = std::fs::read_to_string(dir.path().join("meta.txt")).unwrap();
    assert_eq!(ProblemMeta::parse(&text).unwrap(), meta);
}
