use dln_lda::linalg::Matrix;
use dln_lda::objective::{
    homogeneity_residual, orthogonality_residual, rayleigh_gradient, rayleigh_loss, EffectiveWeights,
};
use dln_lda::oracle::{fd_gradient, generalized_eig_min};
use dln_lda::scatter::{synthesize_scatter, ScatterPair, Spread};
use proptest::prelude::*;

fn quad(m: &Matrix, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            s += w[i] * m[(i, j)] * w[j];
        }
    }
    s
}

fn reference_pair() -> ScatterPair {
    synthesize_scatter(5, 8086, Spread::default()).unwrap()
}

#[test]
fn loss_matches_double_loop() {
    let pair = reference_pair();
    let w = vec![0.31, -1.4, 0.77, 2.1, -0.05];
    let expected = quad(pair.s_w(), &w) / quad(pair.s_b(), &w);
    let got = rayleigh_loss(&EffectiveWeights(w), &pair).unwrap();
    assert!(((got - expected) / expected).abs() <= 1e-14, "{got} vs {expected}");
}

#[test]
fn gradient_vanishes_at_generalized_eigenvector() {
    let pair = reference_pair();
    let eig = generalized_eig_min(&pair).unwrap();
    let g = rayleigh_gradient(&EffectiveWeights(eig.v_min.clone()), &pair).unwrap();
    assert!(g.iter().all(|x| x.abs() <= 1e-10), "{g:?}");
}

#[test]
fn gradient_matches_finite_differences_on_reference_pair() {
    let pair = reference_pair();
    let w = vec![0.5, 1.2, -0.7, 0.9, 1.6];
    let analytic = rayleigh_gradient(&EffectiveWeights(w.clone()), &pair).unwrap();
    let numeric = fd_gradient(
        |x| quad(pair.s_w(), x) / quad(pair.s_b(), x),
        &w,
        1e-6,
    )
    .unwrap();
    let err: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err / norm <= 1e-6, "{}", err / norm);
}

#[test]
fn tiny_scale_homogeneity_against_brute_force() {
    let pair = synthesize_scatter(6, 77, Spread::new(0.2, 0.9)).unwrap();
    let w = vec![0.4, -0.3, 1.1, 0.8, -1.7, 0.6];
    let scaled: Vec<f64> = w.iter().map(|x| 1e-3 * x).collect();
    let base = quad(pair.s_w(), &w) / quad(pair.s_b(), &w);
    let small = quad(pair.s_w(), &scaled) / quad(pair.s_b(), &scaled);
    assert!(((small - base) / base).abs() <= 1e-12);
    assert!(homogeneity_residual(&EffectiveWeights(w), &pair, 1e-3).unwrap() <= 1e-12);
}

#[test]
fn zero_gradient_case_uses_guard() {
    let p = reference_pair();
    let same = ScatterPair::new(p.s_b().clone(), p.s_b().clone()).unwrap();
    let r = orthogonality_residual(&EffectiveWeights(vec![1.0, 2.0, 3.0, 4.0, 5.0]), &same).unwrap();
    assert!(r <= 1e-10);
    assert!(r.is_finite());
}

fn pair_and_weights() -> impl Strategy<Value = (ScatterPair, Vec<f64>)> {
    (2usize..=16, any::<u64>(), 0.05..0.5f64, 0.1..1.0f64).prop_flat_map(|(d, seed, lo, width)| {
        let pair = synthesize_scatter(d, seed, Spread::new(lo, lo + width)).unwrap();
        let w = prop::collection::vec(
            prop_oneof![-5.0..-0.05f64, 0.05..5.0f64],
            d,
        );
        (Just(pair), w)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_is_orthogonal_to_weights((pair, w) in pair_and_weights()) {
        let r = orthogonality_residual(&EffectiveWeights(w), &pair).unwrap();
        prop_assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn loss_is_scale_invariant((pair, w) in pair_and_weights(), alpha in prop_oneof![1e-3..1e3f64, -1e3..-1e-3f64]) {
        let r = homogeneity_residual(&EffectiveWeights(w), &pair, alpha).unwrap();
        prop_assert!(r <= 1e-12, "residual {r} at alpha {alpha}");
    }

    #[test]
    fn loss_bounded_below_by_smallest_eigenvalue((pair, w) in pair_and_weights()) {
        let loss = rayleigh_loss(&EffectiveWeights(w), &pair).unwrap();
        let eig = generalized_eig_min(&pair).unwrap();
        prop_assert!(loss > 0.0);
        prop_assert!(loss >= eig.lambda_min * (1.0 - 1e-12), "{loss} < {}", eig.lambda_min);
    }
}
