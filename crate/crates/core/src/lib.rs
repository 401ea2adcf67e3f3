//! Gradient descent and gradient flow of the generalized Rayleigh quotient
//! `L(w) = wᵀS_w w / wᵀS_b w` on depth-`L` diagonal linear networks, together
//! with the conservation laws the dynamics obey: orthogonality of the loss
//! gradient to `w`, layer balancedness, and constancy of `Σ_i w_i^(2/L)`.

pub mod dynamics;
mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod objective;
pub mod oracle;
pub mod rng;
pub mod scatter;

pub use error::{Error, Result, SpdVerdict};
