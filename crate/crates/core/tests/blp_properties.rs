mod common;

use common::{blp_oracle, TestRng};
use nalgebra::{DMatrix, DVector};
use poisson_blp::blp::{apply_filter, build_filter, Jitter};
use poisson_blp::image::{Origin, Patch};
use poisson_blp::linalg::{GroupStats, Matrix, SymMatrix};
use proptest::prelude::*;

fn stats_from(mean: Vec<f64>, sigma: &DMatrix<f64>) -> GroupStats {
    let n = mean.len();
    let dense = Matrix::from_vec(n, n, sigma.transpose().as_slice().to_vec()).unwrap();
    GroupStats {
        mean,
        cov: SymMatrix::from_lower(&dense).unwrap(),
        count: 30,
    }
}

fn gain_matrix(g: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(g.rows(), g.cols(), g.data())
}

/// Random low-rank-or-full PSD Σ = M Mᵀ and positive means.
fn random_model(rng: &mut TestRng, n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let r = 1 + rng.below(n + 1);
    let m = DMatrix::from_fn(n, r, |_, _| rng.normal() * rng.range(0.1, 3.0));
    let mean = (0..n).map(|_| rng.range(0.05, 30.0)).collect();
    (mean, &m * m.transpose())
}

#[test]
fn gain_spectrum_lies_in_unit_interval() {
    let mut rng = TestRng::new(40);
    for trial in 0..200 {
        let n = [1, 2, 3, 5, 8, 16][trial % 6];
        let (mean, sigma) = random_model(&mut rng, n);
        let f = build_filter(&stats_from(mean.clone(), &sigma), Jitter::default()).unwrap();
        let g = gain_matrix(&f.gain);
        let mut a = sigma.clone();
        for i in 0..n {
            a[(i, i)] += mean[i] + f.jitter_used;
        }
        // L⁻¹ G L is similar to G and equals L⁻¹ Σ L⁻ᵀ, which is symmetric.
        let l = a.clone().cholesky().unwrap().l();
        let l_inv = l.clone().try_inverse().unwrap();
        let s = &l_inv * &g * &l;
        let sym = (&s + s.transpose()) * 0.5;
        assert!((&s - &sym).norm() <= 1e-8 * (1.0 + s.norm()), "trial {trial}");
        for e in sym.symmetric_eigen().eigenvalues.iter() {
            assert!(*e >= -1e-9 && *e <= 1.0 + 1e-6, "trial {trial}: eigenvalue {e}");
        }
    }
}

#[test]
fn gain_contracts_in_noisy_covariance_metric() {
    let mut rng = TestRng::new(41);
    for trial in 0..200 {
        let n = [2, 4, 8][trial % 3];
        let (mean, sigma) = random_model(&mut rng, n);
        let f = build_filter(&stats_from(mean.clone(), &sigma), Jitter::default()).unwrap();
        let g = gain_matrix(&f.gain);
        let mut a = sigma.clone();
        for i in 0..n {
            a[(i, i)] += mean[i] + f.jitter_used;
        }
        let a_inv = a.try_inverse().unwrap();
        let v = DVector::from_fn(n, |_, _| rng.normal());
        let gv = &g * &v;
        let before = (v.transpose() * &a_inv * &v)[0];
        let after = (gv.transpose() * &a_inv * &gv)[0];
        assert!(after <= before * (1.0 + 1e-9), "trial {trial}: {after} > {before}");
    }
}

/// The Euclidean operator norm of the gain is not bounded by one: strongly
/// correlated pixels with very different means let the quiet pixel borrow
/// from the noisy one.
#[test]
fn euclidean_norm_can_exceed_one() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let f = build_filter(&stats_from(vec![1e-6, 1e3], &sigma), Jitter::Absolute(0.0)).unwrap();
    let g = gain_matrix(&f.gain);
    let top = g.singular_values().max();
    assert!(top > 1.3, "{top}");
}

#[test]
fn scalar_gain() {
    for &(s, m) in &[(4.0, 4.0), (1.0, 9.0), (25.0, 0.5)] {
        let f = build_filter(&stats_from(vec![m], &DMatrix::from_element(1, 1, s)), Jitter::Absolute(0.0)).unwrap();
        assert!((f.gain.get(0, 0) - s / (s + m)).abs() <= 1e-15);
    }
}

#[test]
fn filter_matches_oracle_on_patches() {
    let mut rng = TestRng::new(42);
    for trial in 0..100 {
        let side = 1 + trial % 4;
        let n = side * side;
        let (mean, sigma) = random_model(&mut rng, n);
        let f = build_filter(&stats_from(mean.clone(), &sigma), Jitter::default()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.below(40) as f64).collect();
        let patch = Patch::new(Origin::new(3, 5), side, y.clone()).unwrap();
        let got = apply_filter(&f, &patch).unwrap();
        assert_eq!(got.origin, patch.origin);
        let cov: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sigma[(i, j)]).collect()).collect();
        let want = blp_oracle(&mean, &cov, f.jitter_used, &y);
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "trial {trial}");
            assert!(*a >= 0.0);
        }
    }
}

proptest! {
    #[test]
    fn mean_observation_maps_to_mean(
        means in prop::collection::vec(0.1f64..50.0, 4),
        seed in 0u64..1000,
    ) {
        let mut rng = TestRng::new(seed);
        let m = DMatrix::from_fn(4, 3, |_, _| rng.normal());
        let sigma = &m * m.transpose();
        let f = build_filter(&stats_from(means.clone(), &sigma), Jitter::default()).unwrap();
        let out = f.apply(&means).unwrap();
        for (a, b) in out.iter().zip(&means) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }
}
