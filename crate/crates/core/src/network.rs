//! Depth-`L` diagonal linear networks: per-feature paths `w_i = ∏_k u_i^(k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::EffectiveWeights;

/// `L × d` layer weights, stored layer-major (`u[k * dim + i]` is layer `k`
/// on feature path `i`).
///
/// For `L ≥ 2` every entry is strictly positive. A single-layer network is
/// the plain linear model `w = u`, which carries no sign constraint, so
/// depth-1 stacks only require finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    depth: usize,
    dim: usize,
    u: Vec<f64>,
}

impl LayerStack {
    /// Builds a stack from one row per layer.
    pub fn new(layers: &[Vec<f64>]) -> Result<Self> {
        let depth = layers.len();
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        let dim = layers[0].len();
        let mut u = Vec::with_capacity(depth * dim);
        for row in layers {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            u.extend_from_slice(row);
        }
        Self::from_flat(depth, dim, u)
    }

    pub fn from_flat(depth: usize, dim: usize, u: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if u.len() != depth * dim {
            return Err(Error::DimensionMismatch {
                expected: depth * dim,
                got: u.len(),
            });
        }
        let bad = |x: f64| !x.is_finite() || (requires_positive(depth) && x <= 0.0);
        if let Some((index, &value)) = u.iter().enumerate().find(|(_, &x)| bad(x)) {
            return Err(Error::NonPositive { index, value });
        }
        Ok(Self { depth, dim, u })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.u[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.u[k * self.dim + i]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.u
    }

    pub fn layers(&self) -> Vec<Vec<f64>> {
        (0..self.depth).map(|k| self.layer(k).to_vec()).collect()
    }
}

/// Whether weights of a depth-`depth` network must stay strictly positive.
pub fn requires_positive(depth: usize) -> bool {
    depth > 1
}

pub(crate) fn products_into(depth: usize, dim: usize, u: &[f64], w: &mut [f64]) {
    w.fill(1.0);
    for k in 0..depth {
        for (wi, &uk) in w.iter_mut().zip(&u[k * dim..(k + 1) * dim]) {
            *wi *= uk;
        }
    }
}

pub fn effective_weights(stack: &LayerStack) -> EffectiveWeights {
    let mut w = vec![0.0; stack.dim];
    products_into(stack.depth, stack.dim, &stack.u, &mut w);
    EffectiveWeights(w)
}

/// Every layer set to `w0^(1/L)`, so all layers agree and the product is `w0`.
pub fn balanced_init(w0_magnitudes: &[f64], depth: usize) -> Result<LayerStack> {
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    if let Some((index, &value)) = w0_magnitudes.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    let root: Vec<f64> = w0_magnitudes
        .iter()
        .map(|&x| nth_root(x, depth))
        .collect();
    let u = root.repeat(depth);
    LayerStack::from_flat(depth, w0_magnitudes.len(), u)
}

fn nth_root(x: f64, n: usize) -> f64 {
    match n {
        1 => x,
        2 => x.sqrt(),
        3 => x.cbrt(),
        _ => x.powf(1.0 / n as f64),
    }
}

/// Chain-rule layer gradients `g[k][i] = (∂L/∂w_i) · w_i / u_i^(k)`, layer-major.
pub(crate) fn layer_gradients_into(
    depth: usize,
    dim: usize,
    u: &[f64],
    w: &[f64],
    loss_grad: &[f64],
    out: &mut [f64],
) {
    for k in 0..depth {
        for i in 0..dim {
            let idx = k * dim + i;
            out[idx] = loss_grad[i] * (w[i] / u[idx]);
        }
    }
}

/// Gradient of the loss with respect to every layer weight, one row per layer.
pub fn layer_gradients(stack: &LayerStack, loss_grad: &[f64]) -> Result<Vec<Vec<f64>>> {
    if loss_grad.len() != stack.dim {
        return Err(Error::DimensionMismatch {
            expected: stack.dim,
            got: loss_grad.len(),
        });
    }
    let w = effective_weights(stack);
    let mut flat = vec![0.0; stack.u.len()];
    layer_gradients_into(stack.depth, stack.dim, &stack.u, w.as_slice(), loss_grad, &mut flat);
    Ok(flat.chunks(stack.dim).map(<[f64]>::to_vec).collect())
}

/// Deviation of a stack from perfect balancedness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub max_residual: f64,
    /// `per_pair[k][m] = max_i |(u_i^(k))² − (u_i^(m))²|`.
    pub per_pair: Vec<Vec<f64>>,
}

pub fn balance_residual(stack: &LayerStack) -> BalanceReport {
    let l = stack.depth;
    let mut per_pair = vec![vec![0.0; l]; l];
    let mut max_residual = 0.0_f64;
    for k in 0..l {
        for m in 0..k {
            let worst = stack
                .layer(k)
                .iter()
                .zip(stack.layer(m))
                .map(|(a, b)| (a * a - b * b).abs())
                .fold(0.0_f64, f64::max);
            per_pair[k][m] = worst;
            per_pair[m][k] = worst;
            max_residual = max_residual.max(worst);
        }
    }
    BalanceReport {
        max_residual,
        per_pair,
    }
}

pub(crate) fn max_balance_residual(depth: usize, dim: usize, u: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..dim {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for k in 0..depth {
            let sq = u[k * dim + i] * u[k * dim + i];
            lo = lo.min(sq);
            hi = hi.max(sq);
        }
        worst = worst.max(hi - lo);
    }
    worst
}

/// Signed layer-pair constants `(u_i^(k))² − (u_i^(m))²` for `k > m`, in
/// `(k, m, i)` lexicographic order. Conserved along gradient flow.
pub fn square_differences(stack: &LayerStack) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..stack.depth {
        for m in 0..k {
            for i in 0..stack.dim {
                let (a, b) = (stack.get(k, i), stack.get(m, i));
                out.push(a * a - b * b);
            }
        }
    }
    out
}
