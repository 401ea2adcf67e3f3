//! Reference computations that share no code path with the optimizer:
//! central finite differences and a Cholesky + cyclic Jacobi solver for the
//! generalized symmetric eigenproblem `S_w v = λ S_b v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SpdVerdict};
use crate::linalg::{cholesky, dot, norm2, solve_dense, solve_lower, solve_lower_transposed, Matrix};
use crate::scatter::ScatterPair;

/// Off-diagonal Frobenius norm, relative to the full norm, at which Jacobi
/// sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const REFINE_STEPS: usize = 4;

/// Central differences `(f(w + h eᵢ) − f(w − h eᵢ)) / 2h`.
pub fn fd_gradient<F>(f: F, w: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("step h must be positive, got {h}")));
    }
    let mut x = w.to_vec();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        x[i] = w[i] + h;
        let fp = f(&x);
        x[i] = w[i] - h;
        let fm = f(&x);
        x[i] = w[i];
        let g = (fp - fm) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFiniteEvaluation { index: i });
        }
        out.push(g);
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with `vectors[(i, j)]` the `i`-th component of
/// eigenvector `j`. Values are unsorted.
pub fn jacobi_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with a plane rotation (Rutishauser's formulation).
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let arp = a[(r, p)];
            let arq = a[(r, q)];
            let new_p = c * arp - s * arq;
            let new_q = s * arp + c * arq;
            a[(r, p)] = new_p;
            a[(p, r)] = new_p;
            a[(r, q)] = new_q;
            a[(q, r)] = new_q;
        }
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// Smallest generalized eigenpair of `(S_w, S_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedEigenResult {
    pub lambda_min: f64,
    /// Unit ℓ₂ norm, first nonzero component positive.
    pub v_min: Vec<f64>,
}

/// Reduces `S_w v = λ S_b v` to `C y = λ y` with `S_b = R Rᵀ`,
/// `C = R⁻¹ S_w R⁻ᵀ`, `v = R⁻ᵀ y`, and solves `C` by Jacobi rotations.
///
/// The Jacobi pair is accurate to `ε‖C‖` in absolute terms, which is coarse
/// for the smallest eigenvalue when `S_b` is ill-conditioned; a few shifted
/// inverse-iteration steps on the original pencil then polish it, keeping
/// whichever iterate has the smallest residual.
pub fn generalized_eig_min(pair: &ScatterPair) -> Result<GeneralizedEigenResult> {
    let n = pair.dim();
    let r = cholesky(pair.s_b()).ok_or(Error::NotSpd(SpdVerdict::NotPositiveDefinite))?;

    // C = R⁻¹ S_w R⁻ᵀ, built column by column: X = R⁻¹ S_w, then C = R⁻¹ Xᵀ.
    let sw = pair.s_w();
    let mut x = Matrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| sw[(i, j)]).collect();
        let sol = solve_lower(&r, &col);
        for i in 0..n {
            x[(i, j)] = sol[i];
        }
    }
    let xt = x.transpose();
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| xt[(i, j)]).collect();
        let sol = solve_lower(&r, &col);
        for i in 0..n {
            c[(i, j)] = sol[i];
        }
    }
    // Remove rounding asymmetry before rotating.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }

    let (values, vectors) = jacobi_eigen(&c)?;
    let (jmin, &lambda_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("dim >= 1");
    let y: Vec<f64> = (0..n).map(|i| vectors[(i, jmin)]).collect();
    let v = solve_lower_transposed(&r, &y);
    let (lambda_min, mut v) = refine(pair, lambda_min, v);
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(GeneralizedEigenResult {
        lambda_min,
        v_min: v,
    })
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn residual_of(pair: &ScatterPair, lambda: f64, v: &[f64]) -> f64 {
    eigen_residual(
        pair,
        &GeneralizedEigenResult {
            lambda_min: lambda,
            v_min: v.to_vec(),
        },
    )
}

fn refine(pair: &ScatterPair, lambda: f64, v: Vec<f64>) -> (f64, Vec<f64>) {
    let mut best_v = normalized(v);
    let mut best_lambda = lambda;
    let mut best_res = residual_of(pair, lambda, &best_v);
    let (sw, sb) = (pair.s_w(), pair.s_b());
    let mut v = best_v.clone();
    let mut shift = lambda;
    for _ in 0..REFINE_STEPS {
        let n = pair.dim();
        let mut a = sw.clone();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= shift * sb[(i, j)];
            }
        }
        let Some(x) = solve_dense(&a, &sb.mul_vec(&v)) else { break };
        if !x.iter().all(|e| e.is_finite()) {
            break;
        }
        v = normalized(x);
        shift = dot(&v, &sw.mul_vec(&v)) / dot(&v, &sb.mul_vec(&v));
        let res = residual_of(pair, shift, &v);
        if res < best_res {
            best_res = res;
            best_lambda = shift;
            best_v = v.clone();
        }
    }
    (best_lambda, best_v)
}

/// `‖S_w v − λ S_b v‖ / ‖S_w v‖`.
pub fn eigen_residual(pair: &ScatterPair, result: &GeneralizedEigenResult) -> f64 {
    let swv = pair.s_w().mul_vec(&result.v_min);
    let sbv = pair.s_b().mul_vec(&result.v_min);
    let r: Vec<f64> = swv
        .iter()
        .zip(&sbv)
        .map(|(a, b)| a - result.lambda_min * b)
        .collect();
    norm2(&r) / norm2(&swv)
}
