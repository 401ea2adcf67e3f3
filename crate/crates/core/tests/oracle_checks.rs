use dln_lda::linalg::{dot, norm2};
use dln_lda::objective::{rayleigh_gradient, rayleigh_loss, EffectiveWeights};
use dln_lda::oracle::{eigen_residual, fd_gradient, generalized_eig_min, jacobi_eigen};
use dln_lda::rng::Stream;
use dln_lda::scatter::{synthesize_scatter, Spread};

#[test]
fn finite_differences_agree_with_analytic_gradient() {
    let pair = synthesize_scatter(5, 8086, Spread::default()).unwrap();
    let w = vec![1.0, 0.8, 1.3, 0.6, 1.1];
    let f = |x: &[f64]| rayleigh_loss(&EffectiveWeights(x.to_vec()), &pair).unwrap();
    let numeric = fd_gradient(f, &w, 1e-6).unwrap();
    let analytic = rayleigh_gradient(&EffectiveWeights(w.clone()), &pair).unwrap();
    let diff: Vec<f64> = numeric.iter().zip(&analytic).map(|(a, b)| a - b).collect();
    assert!(norm2(&diff) / norm2(&analytic) <= 1e-6);
    // Independent confirmation of orthogonality, looser for FD noise.
    let cos = dot(&numeric, &w).abs() / (norm2(&numeric) * norm2(&w));
    assert!(cos <= 1e-4, "{cos}");
}

#[test]
fn eigen_pairs_on_random_problems() {
    let mut rng = Stream::new(17);
    for _ in 0..200 {
        let d = rng.range(2, 8);
        let pair = synthesize_scatter(d, rng.next_u64(), Spread::new(0.1, 1.0)).unwrap();
        let e = generalized_eig_min(&pair).unwrap();
        assert!(e.lambda_min > 0.0);
        assert!(eigen_residual(&pair, &e) <= 1e-8);
        let at_v = rayleigh_loss(&EffectiveWeights(e.v_min.clone()), &pair).unwrap();
        assert!(((at_v - e.lambda_min) / e.lambda_min).abs() <= 1e-8);
    }
}

#[test]
fn jacobi_matches_nalgebra_spectrum() {
    let mut rng = Stream::new(5);
    for n in 1..=12 {
        let g = dln_lda::linalg::Matrix::from_row_major(n, n, rng.vector(n * n, -1.0, 1.0)).unwrap();
        let a = g.gram();
        let (mut mine, _) = jacobi_eigen(&a).unwrap();
        mine.sort_by(f64::total_cmp);
        let na = nalgebra::DMatrix::from_row_slice(n, n, a.as_slice());
        let mut theirs: Vec<f64> = nalgebra::SymmetricEigen::new(na).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        let scale = a.frobenius_norm();
        for (x, y) in mine.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-12 * scale, "n={n}: {x} vs {y}");
        }
    }
}
