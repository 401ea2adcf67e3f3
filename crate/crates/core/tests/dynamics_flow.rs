use dln_lda::dynamics::{
    conservation_report, effective_flow_rhs, gd_run, integrate_flow, FlowConfig, FlowMode, Integrator,
    Termination,
};
use dln_lda::linalg::Matrix;
use dln_lda::network::{balanced_init, effective_weights, layer_gradients};
use dln_lda::objective::{rayleigh_gradient, EffectiveWeights};
use dln_lda::oracle::generalized_eig_min;
use dln_lda::scatter::{synthesize_scatter, ScatterPair, Spread};
use dln_lda::Error;
use proptest::prelude::*;

fn pair(d: usize) -> ScatterPair {
    synthesize_scatter(d, 8086, Spread::default()).unwrap()
}

#[test]
fn effective_rhs_matches_per_layer_composition() {
    let p = pair(5);
    let w0 = [0.4, 1.3, 0.8, 2.2, 0.6];
    let stack = balanced_init(&w0, 5).unwrap();
    let w = effective_weights(&stack);
    let g = rayleigh_gradient(&w, &p).unwrap();
    let lg = layer_gradients(&stack, &g).unwrap();
    let composed: Vec<f64> = (0..5)
        .map(|i| (0..5).map(|k| (w.0[i] / stack.get(k, i)) * -lg[k][i]).sum())
        .collect();
    let rhs = effective_flow_rhs(&EffectiveWeights(w0.to_vec()), &p, 5).unwrap();
    for (a, b) in rhs.iter().zip(&composed) {
        assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn equal_matrices_give_zero_field() {
    let p = pair(3);
    let same = ScatterPair::new(p.s_w().clone(), p.s_w().clone()).unwrap();
    let rhs = effective_flow_rhs(&vec![0.3, 1.0, 4.0].into(), &same, 4).unwrap();
    assert!(rhs.iter().all(|x| x.abs() < 1e-14));
}

#[test]
fn two_dimensional_rk4_flow_decreases_loss_and_conserves() {
    let p = pair(2);
    let cfg = FlowConfig::flow(2, 1e-3, 10.0, Integrator::Rk4, FlowMode::Effective).with_record_every(10);
    let tr = integrate_flow(&vec![1.0, 1.0].into(), &p, &cfg).unwrap();
    assert_eq!(tr.snapshots.len(), 1001);
    for pair_ in tr.snapshots.windows(2) {
        assert!(pair_[1].loss <= pair_[0].loss + 1e-12);
    }
    assert!(conservation_report(&tr.snapshots, 2).unwrap().max_relative_drift <= 1e-8);

    let euler = FlowConfig { integrator: Integrator::ExplicitEuler, mode: FlowMode::PerLayer, ..cfg };
    let tr = integrate_flow(&vec![1.0, 1.0].into(), &p, &euler).unwrap();
    assert!(conservation_report(&tr.snapshots, 2).unwrap().max_relative_drift <= 1e-4);
}

#[test]
fn five_layer_flow_conserves_quasi_norm() {
    let p = pair(5);
    let cfg = FlowConfig::flow(5, 1e-3, 50.0, Integrator::Rk4, FlowMode::Effective).with_record_every(50);
    let tr = integrate_flow(&vec![1.0; 5].into(), &p, &cfg).unwrap();
    let r = conservation_report(&tr.snapshots, 5).unwrap();
    assert_eq!(r.initial, 5.0);
    assert!(r.max_relative_drift <= 1e-8, "{}", r.max_relative_drift);
    let lambda = generalized_eig_min(&p).unwrap().lambda_min;
    assert!(tr.snapshots.iter().all(|s| s.loss >= lambda - 1e-10));
}

#[test]
fn euler_drift_halves_with_step() {
    let p = ScatterPair::new(Matrix::from_diagonal(&[1.0, 3.0, 9.0]), Matrix::identity(3)).unwrap();
    let drift = |dt| {
        let cfg = FlowConfig::flow(5, dt, 5.0, Integrator::ExplicitEuler, FlowMode::Effective);
        let tr = integrate_flow(&vec![1.0; 3].into(), &p, &cfg).unwrap();
        conservation_report(&tr.snapshots, 5).unwrap().max_relative_drift
    };
    let ratio = drift(2e-3) / drift(1e-3);
    assert!((1.8..2.2).contains(&ratio), "{ratio}");
}

#[test]
fn flow_aborts_on_positivity_breach() {
    let p = ScatterPair::new(Matrix::from_diagonal(&[30.0, 90.0, 270.0]), Matrix::identity(3)).unwrap();
    let cfg = FlowConfig::flow(5, 4e-3, 1.0, Integrator::ExplicitEuler, FlowMode::Effective);
    let err = integrate_flow(&vec![1.0; 3].into(), &p, &cfg).unwrap_err();
    assert!(matches!(err, Error::PositivityBreach { index: 2, .. }), "{err:?}");
}

#[test]
fn descent_on_reference_config_sparsifies() {
    let p = pair(5);
    for depth in [2, 5, 10, 20] {
        let stack = balanced_init(&[1.0; 5], depth).unwrap();
        let tr = gd_run(&stack, &p, &FlowConfig::gradient_descent(depth, 0.005, 100_000)).unwrap();
        assert_eq!(tr.termination, Termination::Completed);
        let w = &tr.last().w.0;
        let max = w.iter().copied().fold(0.0, f64::max);
        // One dominant coordinate grows, the rest decay.
        assert!(max > 1.0);
        assert_eq!(w.iter().filter(|&&x| x < 1.0).count(), 4, "L={depth}: {w:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn per_layer_and_effective_flows_agree(
        seed in any::<u64>(),
        d in prop_oneof![Just(2usize), Just(5usize)],
        depth in prop_oneof![Just(1usize), Just(2usize), Just(5usize)],
        w0 in prop::collection::vec(0.5..1.5f64, 5),
    ) {
        let p = synthesize_scatter(d, seed, Spread::new(0.1, 1.0)).unwrap();
        let w0 = EffectiveWeights(w0[..d].to_vec());
        let cfg = |mode| FlowConfig::flow(depth, 1e-3, 2.0, Integrator::Rk4, mode).with_record_every(100);
        let a = integrate_flow(&w0, &p, &cfg(FlowMode::PerLayer)).unwrap();
        let b = integrate_flow(&w0, &p, &cfg(FlowMode::Effective)).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert!(x.balance_residual <= 1e-8);
            for (u, v) in x.w.as_slice().iter().zip(y.w.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-8 * v.abs());
            }
        }
    }
}
