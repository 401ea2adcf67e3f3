//! The discriminant loss `L(w) = (wᵀ S_w w) / (wᵀ S_b w)` and its gradient.
//!
//! The loss is *minimized*: small intra-class scatter relative to
//! inter-class scatter. Its infimum is therefore the smallest generalized
//! eigenvalue of `(S_w, S_b)`, the opposite orientation to the classical
//! Fisher criterion, which maximizes `S_b / S_w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::scatter::ScatterPair;

/// Guard added to the denominator of [`orthogonality_residual`].
pub const ORTHOGONALITY_GUARD: f64 = 1e-30;

/// End-to-end weight vector of a diagonal network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectiveWeights(pub Vec<f64>);

impl EffectiveWeights {
    pub fn new(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|x| alpha * x).collect())
    }
}

impl From<Vec<f64>> for EffectiveWeights {
    fn from(w: Vec<f64>) -> Self {
        Self(w)
    }
}

/// Loss value together with the two quadratic forms it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quotient {
    pub numerator: f64,
    pub denominator: f64,
    pub loss: f64,
}

fn check(w: &[f64], pair: &ScatterPair) -> Result<()> {
    if w.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: w.len(),
        });
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(())
}

/// Evaluates `L(w)` and, into `grad`, the closed-form gradient
/// `(2 / wᵀS_b w) (S_w w − L(w) S_b w)`. `scratch` must have length `2d`.
pub(crate) fn loss_and_gradient_into(
    w: &[f64],
    pair: &ScatterPair,
    grad: &mut [f64],
    scratch: &mut [f64],
) -> Result<Quotient> {
    let d = w.len();
    let (sw_w, sb_w) = scratch.split_at_mut(d);
    pair.s_w().mul_vec_into(w, sw_w);
    pair.s_b().mul_vec_into(w, sb_w);
    let numerator = dot(w, sw_w);
    let denominator = dot(w, sb_w);
    if !(denominator > 0.0) {
        return Err(Error::DegenerateDenominator(denominator));
    }
    let loss = numerator / denominator;
    let scale = 2.0 / denominator;
    for i in 0..d {
        grad[i] = scale * (sw_w[i] - loss * sb_w[i]);
    }
    Ok(Quotient {
        numerator,
        denominator,
        loss,
    })
}

pub fn rayleigh_quotient(w: &EffectiveWeights, pair: &ScatterPair) -> Result<Quotient> {
    check(w.as_slice(), pair)?;
    let sw_w = pair.s_w().mul_vec(w.as_slice());
    let sb_w = pair.s_b().mul_vec(w.as_slice());
    let numerator = dot(w.as_slice(), &sw_w);
    let denominator = dot(w.as_slice(), &sb_w);
    if !(denominator > 0.0) {
        return Err(Error::DegenerateDenominator(denominator));
    }
    Ok(Quotient {
        numerator,
        denominator,
        loss: numerator / denominator,
    })
}

pub fn rayleigh_loss(w: &EffectiveWeights, pair: &ScatterPair) -> Result<f64> {
    rayleigh_quotient(w, pair).map(|q| q.loss)
}

/// Analytic gradient of [`rayleigh_loss`] with respect to `w`.
pub fn rayleigh_gradient(w: &EffectiveWeights, pair: &ScatterPair) -> Result<Vec<f64>> {
    check(w.as_slice(), pair)?;
    let d = w.len();
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; 2 * d];
    loss_and_gradient_into(w.as_slice(), pair, &mut grad, &mut scratch)?;
    Ok(grad)
}

/// `|L(αw) − L(w)| / |L(w)|`.
pub fn homogeneity_residual(w: &EffectiveWeights, pair: &ScatterPair, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::ZeroScale);
    }
    let base = rayleigh_loss(w, pair)?;
    let scaled = rayleigh_loss(&w.scaled(alpha), pair)?;
    Ok((scaled - base).abs() / base.abs())
}

/// `|wᵀ∇L| / (‖w‖ ‖∇L‖ + τ)`, the cosine between the weights and the
/// gradient, guarded at critical points.
pub fn orthogonality_residual(w: &EffectiveWeights, pair: &ScatterPair) -> Result<f64> {
    let grad = rayleigh_gradient(w, pair)?;
    let inner = dot(w.as_slice(), &grad);
    Ok(inner.abs() / (norm2(w.as_slice()) * norm2(&grad) + ORTHOGONALITY_GUARD))
}
