mod common;

use common::{brute_stats, TestRng};
use nalgebra::DMatrix;
use poisson_blp::linalg::{sample_stats, solve_spd, Matrix, SymMatrix};

#[test]
fn sample_stats_match_double_loop() {
    let mut rng = TestRng::new(10);
    for &(n, k) in &[(4, 30), (1, 2), (8, 3), (16, 64), (64, 30), (64, 64), (3, 64)] {
        let samples: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.range(0.0, 40.0)).collect())
            .collect();
        let (mean, cov) = brute_stats(&samples);
        let st = sample_stats(&samples, n).unwrap();
        assert_eq!(st.count, k);
        for i in 0..n {
            assert!((st.mean[i] - mean[i]).abs() <= 1e-12);
            for (j, want) in cov[i].iter().enumerate() {
                assert!((st.cov.get(i, j) - want).abs() <= 1e-12, "n={n} k={k} ({i},{j})");
            }
        }
    }
}

#[test]
fn sample_covariance_is_psd() {
    let mut rng = TestRng::new(11);
    let samples: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..64).map(|_| rng.range(0.0, 10.0)).collect())
        .collect();
    let st = sample_stats(&samples, 64).unwrap();
    let dense = st.cov.to_dense();
    let m = DMatrix::from_row_slice(64, 64, dense.data());
    let eig = m.symmetric_eigen();
    let tol = 1e-9 * st.cov.trace();
    assert!(eig.eigenvalues.iter().all(|&e| e >= -tol));
    // rank is at most k − 1
    let positive = eig.eigenvalues.iter().filter(|&&e| e > tol).count();
    assert!(positive <= 29);
}

fn random_spd(rng: &mut TestRng, n: usize) -> SymMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let a = m.transpose() * &m + DMatrix::identity(n, n);
    let dense = Matrix::from_vec(n, n, a.transpose().as_slice().to_vec()).unwrap();
    SymMatrix::from_lower(&dense).unwrap()
}

#[test]
fn spd_solve_residual() {
    let mut rng = TestRng::new(12);
    for trial in 0..50 {
        let n = 8;
        let a = random_spd(&mut rng, n);
        let cols = 1 + trial % 5;
        let b = Matrix::from_vec(n, cols, (0..n * cols).map(|_| rng.normal()).collect()).unwrap();
        let eps = if trial % 2 == 0 { 0.0 } else { 0.1 };
        let sol = solve_spd(&a, &b, eps).unwrap();
        assert_eq!(sol.jitter, eps);
        let dense = a.to_dense();
        let mut resid = 0.0;
        for i in 0..n {
            for j in 0..cols {
                let ax: f64 = (0..n).map(|k| dense.get(i, k) * sol.x.get(k, j)).sum::<f64>()
                    + eps * sol.x.get(i, j);
                resid += (ax - b.get(i, j)).powi(2);
            }
        }
        assert!(resid.sqrt() <= 1e-8 * b.frobenius_norm(), "trial {trial}");
    }
}

#[test]
fn spd_solve_agrees_with_lu() {
    let mut rng = TestRng::new(13);
    let n = 16;
    let a = random_spd(&mut rng, n);
    let rhs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let sol = solve_spd(&a, &Matrix::column(&rhs), 0.0).unwrap();
    let dense = a.to_dense();
    let lu = DMatrix::from_row_slice(n, n, dense.data())
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(&rhs))
        .unwrap();
    for i in 0..n {
        assert!((sol.x.get(i, 0) - lu[i]).abs() <= 1e-10 * (1.0 + lu[i].abs()));
    }
}
