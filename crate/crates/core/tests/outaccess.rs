mod common;

use common::*;
use qinspired::{CompressedSolution, Error, RandomStream, SparseIterate, SqMatrix};

/// Exact `Pr[j] = x_j² / ‖x‖²` from a dense `Aᵀy`.
fn exact_dx(m: &SqMatrix, y: &SparseIterate) -> Vec<f64> {
    let x = dense_tmul(m, &y.to_dense(m.nrows()));
    normalize(&x.iter().map(|v| v * v).collect::<Vec<_>>())
}

/// Column marginal of the two-stage proposal, by summing over the support.
fn proposal_marginal(m: &SqMatrix, y: &SparseIterate) -> Vec<f64> {
    let rows = row_norms_sq(m);
    let total: f64 = y.iter().map(|(r, v)| v * v * rows[r]).sum();
    (0..m.ncols())
        .map(|c| {
            y.iter()
                .map(|(r, v)| v * v * entry(m, r, c).powi(2))
                .sum::<f64>()
                / total
        })
        .collect()
}

#[test]
fn query_matches_dense_product() {
    for seed in 0..5 {
        let m = uniform_matrix(6, 4, seed);
        let y = sparse_y(6, 3, seed + 10);
        let x = dense_tmul(&m, &y.to_dense(6));
        let sol = CompressedSolution::new(&m, y).unwrap();
        for j in 0..4 {
            assert!((sol.query(j).unwrap() - x[j]).abs() < 1e-12);
        }
        assert!(max_abs_diff(&sol.to_dense(), &x) < 1e-12);
        assert!((sol.x_sqnorm() - norm(&x).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn proposal_matches_enumeration() {
    for seed in 0..10 {
        let n = 3 + (seed as usize % 4);
        let d = 2 + (seed as usize % 5);
        let m = uniform_matrix(n, d, 400 + seed);
        let y = sparse_y(n, n.div_ceil(2), seed);
        let rows = row_norms_sq(&m);
        let total: f64 = y.iter().map(|(r, v)| v * v * rows[r]).sum();
        let sol = CompressedSolution::new(&m, y.clone()).unwrap();
        for (r, p) in sol.proposal_row_probs().unwrap() {
            assert!((p - y.get(r).powi(2) * rows[r] / total).abs() < 1e-12);
        }
        assert!((sol.weighted_row_mass() - total).abs() < 1e-12);

        // proposal × acceptance is proportional to x_j², and φ is the normaliser
        let marginal = proposal_marginal(&m, &y);
        let accepted: Vec<f64> = (0..d)
            .map(|c| marginal[c] * sol.acceptance_ratio(c))
            .collect();
        let mass: f64 = accepted.iter().sum();
        assert!(max_abs_diff(&normalize(&accepted), &exact_dx(&m, &y)) < 1e-12);
        assert!((1.0 / mass - sol.phi().unwrap()).abs() < 1e-9 * sol.phi().unwrap());
    }
}

#[test]
fn acceptance_ratio_is_a_probability() {
    for seed in 0..20 {
        let m = uniform_matrix(8, 6, seed);
        let sol = CompressedSolution::new(&m, sparse_y(8, 1 + seed as usize % 8, seed)).unwrap();
        for c in 0..6 {
            let r = sol.acceptance_ratio(c);
            assert!((0.0..=1.0 + 1e-9).contains(&r), "ratio {r}");
        }
    }
}

#[test]
fn proposal_draws_follow_marginal() {
    let m = uniform_matrix(8, 5, 77);
    let y = sparse_y(8, 4, 78);
    let sol = CompressedSolution::new(&m, y.clone()).unwrap();
    let mut rng = RandomStream::new(1);
    let draws: Vec<usize> = (0..50_000)
        .map(|_| sol.sample_proposal(&mut rng).unwrap())
        .collect();
    assert!(total_variation(&frequencies(&draws, 5), &proposal_marginal(&m, &y)) <= 0.02);
}

#[test]
fn samples_follow_dx_and_cost_about_phi_rounds() {
    let m = uniform_matrix(8, 5, 90);
    let y = sparse_y(8, 4, 91);
    let sol = CompressedSolution::new(&m, y.clone()).unwrap();
    let phi = sol.phi().unwrap();
    let mut rng = RandomStream::new(2);
    let mut rounds = 0;
    let draws: Vec<usize> = (0..50_000)
        .map(|_| {
            let s = sol.sample(&mut rng).unwrap();
            assert_eq!(s.phi_at_sample, phi);
            rounds += s.iterations_used;
            s.accepted_index
        })
        .collect();
    let tv = total_variation(&frequencies(&draws, 5), &exact_dx(&m, &y));
    assert!(tv <= 0.02, "tv {tv}");
    let mean = rounds as f64 / draws.len() as f64;
    assert!(
        mean >= phi / 2.0 && mean <= 2.0 * phi,
        "mean rounds {mean}, phi {phi}"
    );
}

#[test]
fn cancelled_iterate_is_degenerate() {
    let m = SqMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]]).unwrap();
    let sol =
        CompressedSolution::new(&m, SparseIterate::from_entries([(0, 1.0), (1, -1.0)])).unwrap();
    assert_eq!(sol.to_dense(), vec![0.0, 0.0]);
    assert!(matches!(sol.phi(), Err(Error::Degenerate(_))));
    assert!(matches!(
        sol.sample(&mut RandomStream::new(0)),
        Err(Error::Degenerate(_))
    ));
    let empty = CompressedSolution::new(&m, SparseIterate::new()).unwrap();
    assert!(empty.sample(&mut RandomStream::new(0)).is_err());
}

#[test]
fn out_of_range_support_is_rejected() {
    let m = uniform_matrix(3, 2, 0);
    assert!(CompressedSolution::new(&m, SparseIterate::from_entries([(3, 1.0)])).is_err());
    assert!(
        CompressedSolution::new(&m, SparseIterate::from_entries([(0, f64::INFINITY)])).is_err()
    );
}
