//! Random problem instances for the property sweeps.

use crate::network::LayerStack;
use crate::objective::EffectiveWeights;
use crate::rng::Stream;
use crate::scatter::{synthesize_scatter, ScatterPair, Spread};

/// Spread used for sweep pairs. Wider than the reference `[0.4, 0.6]` so the
/// sweeps see better-conditioned pairs as well as nearly collinear ones.
pub const SWEEP_SPREAD: Spread = Spread::new(0.1, 1.0);

pub fn random_pair(stream: &mut Stream, dim: usize) -> ScatterPair {
    synthesize_scatter(dim, stream.next_u64(), SWEEP_SPREAD).expect("valid sweep arguments")
}

/// Mixed-sign weights with magnitudes log-uniform on `[0.1, 10]`.
pub fn random_weights(stream: &mut Stream, dim: usize) -> EffectiveWeights {
    (0..dim)
        .map(|_| {
            let m = stream.log_uniform(0.1, 10.0);
            if stream.unit() < 0.5 { -m } else { m }
        })
        .collect::<Vec<_>>()
        .into()
}

/// Positive weights uniform on `[lo, hi]`.
pub fn random_positive(stream: &mut Stream, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    stream.vector(dim, lo, hi)
}

/// Independent positive entries per layer, uniform on `[lo, hi]`.
pub fn random_stack(stream: &mut Stream, depth: usize, dim: usize, lo: f64, hi: f64) -> LayerStack {
    LayerStack::from_flat(depth, dim, stream.vector(depth * dim, lo, hi)).expect("positive entries")
}
