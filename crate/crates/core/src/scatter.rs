//! Scatter-matrix pairs `(S_w, S_b)` that define the discriminant objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SpdVerdict};
use crate::linalg::{cholesky, Matrix};
use crate::rng::Stream;

/// Absolute tolerance on `|m_ij - m_ji|` accepted by [`validate_spd`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Closed interval `[lo, hi]` that raw draws are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub lo: f64,
    pub hi: f64,
}

impl Spread {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

impl Default for Spread {
    fn default() -> Self {
        Self::new(0.4, 0.6)
    }
}

/// Intra-class (`s_w`) and inter-class (`s_b`) scatter matrices.
///
/// Both are exactly symmetric and positive definite; the constructors refuse
/// anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    s_w: Matrix,
    s_b: Matrix,
}

impl ScatterPair {
    pub fn new(s_w: Matrix, s_b: Matrix) -> Result<Self> {
        for m in [&s_w, &s_b] {
            match validate_spd(m)? {
                SpdVerdict::Ok => {}
                v => return Err(Error::NotSpd(v)),
            }
        }
        if s_w.rows() != s_b.rows() {
            return Err(Error::DimensionMismatch {
                expected: s_w.rows(),
                got: s_b.rows(),
            });
        }
        if s_w.rows() == 0 {
            return Err(Error::ZeroDimension);
        }
        // Exact symmetry: mirror the lower triangle.
        Ok(Self {
            s_w: symmetrize(s_w),
            s_b: symmetrize(s_b),
        })
    }

    pub fn dim(&self) -> usize {
        self.s_w.rows()
    }

    pub fn s_w(&self) -> &Matrix {
        &self.s_w
    }

    pub fn s_b(&self) -> &Matrix {
        &self.s_b
    }
}

fn symmetrize(mut m: Matrix) -> Matrix {
    for i in 0..m.rows() {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

/// Raw uniform draws `G` before the Gram step, for `S_w` and `S_b`.
#[derive(Debug, Clone)]
pub struct RawDraws {
    pub g_w: Matrix,
    pub g_b: Matrix,
}

/// Jitter added to the Gram product: `dim · hi² · 1e-6`.
pub fn jitter(dim: usize, spread: Spread) -> f64 {
    dim as f64 * spread.hi * spread.hi * 1e-6
}

fn check_synth_args(dim: usize, spread: Spread) -> Result<()> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let Spread { lo, hi } = spread;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::DegenerateSpread { lo, hi });
    }
    Ok(())
}

fn draw(dim: usize, spread: Spread, stream: &mut Stream) -> Matrix {
    let data = stream.vector(dim * dim, spread.lo, spread.hi);
    Matrix::from_row_major(dim, dim, data).expect("dim*dim entries")
}

fn raw_unchecked(dim: usize, seed: u64, spread: Spread) -> RawDraws {
    let g_w = draw(dim, spread, &mut Stream::substream(seed, 0));
    let g_b = draw(dim, spread, &mut Stream::substream(seed, 1));
    RawDraws { g_w, g_b }
}

/// The uniform matrices [`synthesize_scatter`] builds its pair from.
pub fn raw_draws(dim: usize, seed: u64, spread: Spread) -> Result<RawDraws> {
    check_synth_args(dim, spread)?;
    Ok(raw_unchecked(dim, seed, spread))
}

fn gram_with_jitter(g: &Matrix, eps: f64) -> Matrix {
    let mut m = g.gram();
    for i in 0..m.rows() {
        m[(i, i)] += eps;
    }
    m
}

/// Deterministic random SPD pair: `M = G Gᵀ + ε I` with `G` uniform on the
/// spread, `S_w` from sub-stream 0 of `seed` and `S_b` from sub-stream 1.
pub fn synthesize_scatter(dim: usize, seed: u64, spread: Spread) -> Result<ScatterPair> {
    check_synth_args(dim, spread)?;
    synthesize_unchecked(dim, seed, spread)
}

fn synthesize_unchecked(dim: usize, seed: u64, spread: Spread) -> Result<ScatterPair> {
    let raw = raw_unchecked(dim, seed, spread);
    let eps = jitter(dim, spread);
    ScatterPair::new(gram_with_jitter(&raw.g_w, eps), gram_with_jitter(&raw.g_b, eps))
}

/// Like [`synthesize_scatter`] but also accepts the collapsed interval
/// `lo == hi`, where every draw equals `lo`.
///
/// With a collapsed interval the Gram matrix has rank one, and the jitter is
/// what keeps the result definite.
pub fn synthesize_scatter_allow_point(dim: usize, seed: u64, spread: Spread) -> Result<ScatterPair> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(spread.lo > 0.0 && spread.hi >= spread.lo) {
        return Err(Error::DegenerateSpread {
            lo: spread.lo,
            hi: spread.hi,
        });
    }
    synthesize_unchecked(dim, seed, spread)
}

/// Symmetry within [`SYMMETRY_TOL`] plus a Cholesky factorization with
/// strictly positive pivots.
pub fn validate_spd(m: &Matrix) -> Result<SpdVerdict> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.asymmetry() > SYMMETRY_TOL {
        return Ok(SpdVerdict::NotSymmetric);
    }
    Ok(match cholesky(m) {
        Some(_) => SpdVerdict::Ok,
        None => SpdVerdict::NotPositiveDefinite,
    })
}

/// JSON provenance document for a synthesized pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterDocument {
    pub dim: usize,
    pub seed: u64,
    pub spread: [f64; 2],
    /// Row-major.
    pub s_w: Vec<f64>,
    /// Row-major.
    pub s_b: Vec<f64>,
}

impl ScatterDocument {
    pub fn new(pair: &ScatterPair, seed: u64, spread: Spread) -> Self {
        Self {
            dim: pair.dim(),
            seed,
            spread: [spread.lo, spread.hi],
            s_w: pair.s_w().as_slice().to_vec(),
            s_b: pair.s_b().as_slice().to_vec(),
        }
    }

    pub fn to_pair(&self) -> Result<ScatterPair> {
        let s_w = Matrix::from_row_major(self.dim, self.dim, self.s_w.clone())?;
        let s_b = Matrix::from_row_major(self.dim, self.dim, self.s_b.clone())?;
        ScatterPair::new(s_w, s_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_seed_is_valid_and_deterministic() {
        let a = synthesize_scatter(5, 8086, Spread::default()).unwrap();
        let b = synthesize_scatter(5, 8086, Spread::default()).unwrap();
        assert_eq!(validate_spd(a.s_w()).unwrap(), SpdVerdict::Ok);
        assert_eq!(validate_spd(a.s_b()).unwrap(), SpdVerdict::Ok);
        let bytes = |p: &ScatterPair| -> Vec<u64> {
            p.s_w()
                .as_slice()
                .iter()
                .chain(p.s_b().as_slice())
                .map(|x| x.to_bits())
                .collect()
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(a.s_w(), a.s_b());
    }

    #[test]
    fn collapsed_interval_gives_one_plus_jitter() {
        let spread = Spread::new(1.0, 1.0);
        assert!(synthesize_scatter(1, 0, spread).is_err());
        let p = synthesize_scatter_allow_point(1, 0, spread).unwrap();
        let eps = 1e-6;
        assert_eq!(p.s_w()[(0, 0)], 1.0 + eps);
        assert_eq!(p.s_b()[(0, 0)], 1.0 + eps);
    }

    #[test]
    fn two_by_two_determinant_trace_check() {
        let p = synthesize_scatter(2, 42, Spread::default()).unwrap();
        for m in [p.s_w(), p.s_b()] {
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let tr = m[(0, 0)] + m[(1, 1)];
            assert!(det > 0.0 && tr > 0.0, "det {det} trace {tr}");
        }
    }

    #[test]
    fn bad_arguments() {
        assert_eq!(
            synthesize_scatter(0, 1, Spread::default()).unwrap_err(),
            Error::ZeroDimension
        );
        assert!(matches!(
            synthesize_scatter(3, 1, Spread::new(0.6, 0.4)),
            Err(Error::DegenerateSpread { .. })
        ));
        assert!(matches!(
            synthesize_scatter(3, 1, Spread::new(0.0, 0.4)),
            Err(Error::DegenerateSpread { .. })
        ));
    }

    #[test]
    fn raw_draws_stay_in_interval() {
        let spread = Spread::new(0.4, 0.6);
        let raw = raw_draws(7, 99, spread).unwrap();
        for &x in raw.g_w.as_slice().iter().chain(raw.g_b.as_slice()) {
            assert!((0.4..=0.6).contains(&x));
        }
    }

    #[test]
    fn validate_verdicts() {
        assert_eq!(validate_spd(&Matrix::identity(3)).unwrap(), SpdVerdict::Ok);
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(
            validate_spd(&indefinite).unwrap(),
            SpdVerdict::NotPositiveDefinite
        );
        let asym = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
        assert_eq!(validate_spd(&asym).unwrap(), SpdVerdict::NotSymmetric);
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(validate_spd(&rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn document_round_trip() {
        let spread = Spread::default();
        let p = synthesize_scatter(3, 5, spread).unwrap();
        let doc = ScatterDocument::new(&p, 5, spread);
        let json = serde_json::to_string(&doc).unwrap();
        let back: ScatterDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_pair().unwrap(), p);
    }
}
