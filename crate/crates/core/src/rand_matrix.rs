//! Gaussian GOE, antisymmetric GOE and elliptic ensembles.
//!
//! `M ~ Elliptic(n, ρ)` is built as `√((1+ρ)/2)·G + √((1−ρ)/2)·G̃` with `G`
//! a GOE matrix `(X + Xᵀ)/√2` and `G̃` an independent antisymmetric GOE
//! matrix `(Y − Yᵀ)/√2`. Entry `(i, j)` of `X` is drawn from a counter-based
//! stream at index `i·n + j`, so every matrix is a pure function of
//! `(n, ρ, seed)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{role, Stream};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticEnsemble {
    n: usize,
    rho: f64,
}

impl EllipticEnsemble {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        check_dimension(n)?;
        check_rho(rho)?;
        Ok(Self { n, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `M ~ Elliptic(n, ρ)`.
    pub fn sample(&self, seed: u64) -> Matrix {
        elliptic_unchecked(self.n, self.rho, seed)
    }

    /// `A = M/√n`.
    pub fn sample_normalized(&self, seed: u64) -> Matrix {
        let m = self.sample(seed);
        if self.n == 1 {
            m
        } else {
            m.scaled(1.0 / (self.n as f64).sqrt())
        }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDimension("matrix dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} is outside [-1, 1]")));
    }
    Ok(())
}

/// Fills a matrix pair by pair from two normals per off-diagonal pair and
/// one per diagonal entry.
fn fill_pairs(
    n: usize,
    stream: Stream,
    diag: impl Fn(f64) -> f64,
    pair: impl Fn(f64, f64) -> (f64, f64),
) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let nn = n as u64;
    for i in 0..n {
        let ii = i as u64;
        m.set(i, i, diag(stream.normal(ii * nn + ii)));
        for j in (i + 1)..n {
            let (x_ij, x_ji) = stream.normal_pair(ii * nn + j as u64);
            let (upper, lower) = pair(x_ij, x_ji);
            m.set(i, j, upper);
            m.set(j, i, lower);
        }
    }
    m
}

fn goe_from(n: usize, stream: Stream) -> Matrix {
    fill_pairs(
        n,
        stream,
        |x| (x + x) * FRAC_1_SQRT_2,
        |a, b| {
            let s = (a + b) * FRAC_1_SQRT_2;
            (s, s)
        },
    )
}

fn antisymmetric_from(n: usize, stream: Stream) -> Matrix {
    fill_pairs(
        n,
        stream,
        |_| 0.0,
        |a, b| {
            let d = (a - b) * FRAC_1_SQRT_2;
            (d, -d)
        },
    )
}

/// `G = (X + Xᵀ)/√2`: symmetric, diagonal variance 2, off-diagonal variance 1.
pub fn sample_goe(n: usize, seed: u64) -> Result<Matrix> {
    check_dimension(n)?;
    Ok(goe_from(n, Stream::new(seed, role::GOE)))
}

/// `G̃ = (Y − Yᵀ)/√2`: antisymmetric with zero diagonal.
pub fn sample_antisymmetric_goe(n: usize, seed: u64) -> Result<Matrix> {
    check_dimension(n)?;
    Ok(antisymmetric_from(n, Stream::new(seed, role::ANTISYMMETRIC)))
}

fn elliptic_unchecked(n: usize, rho: f64, seed: u64) -> Matrix {
    let sym = goe_from(n, Stream::new(seed, role::ELLIPTIC_SYMMETRIC));
    let anti = antisymmetric_from(n, Stream::new(seed, role::ELLIPTIC_ANTISYMMETRIC));
    let ws = ((1.0 + rho) / 2.0).sqrt();
    let wa = ((1.0 - rho) / 2.0).sqrt();
    let mut m = sym;
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, ws * m.get(i, j) + wa * anti.get(i, j));
        }
    }
    m
}

/// `M ~ Elliptic(n, ρ)`: diagonal `N(0, 1+ρ)`, pairs `(M_ij, M_ji)` with unit
/// variances and correlation `ρ`.
pub fn sample_elliptic(n: usize, rho: f64, seed: u64) -> Result<Matrix> {
    Ok(EllipticEnsemble::new(n, rho)?.sample(seed))
}

/// `A = M/√n` with `M ~ Elliptic(n, ρ)`.
pub fn sample_normalized_elliptic(n: usize, rho: f64, seed: u64) -> Result<Matrix> {
    Ok(EllipticEnsemble::new(n, rho)?.sample_normalized(seed))
}

pub use linalg::{spectral_norm, symmetric_part_norm};

/// Almost-sure limit of `‖(A + Aᵀ)/2‖` for a normalized elliptic matrix.
pub fn symmetric_part_norm_limit(rho: f64) -> f64 {
    (2.0 * (1.0 + rho)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goe_is_exactly_symmetric() {
        let g = sample_goe(5, 7).unwrap();
        assert!(g.is_symmetric());
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(sample_goe(0, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(sample_elliptic(0, 0.0, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn rho_out_of_range_is_rejected() {
        assert!(matches!(sample_elliptic(3, 1.5, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(sample_elliptic(3, -1.01, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(sample_elliptic(3, f64::NAN, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn extreme_rho_gives_exact_structure() {
        let s = sample_elliptic(6, 1.0, 3).unwrap();
        assert!(s.is_symmetric());
        let a = sample_elliptic(6, -1.0, 3).unwrap();
        for i in 0..6 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..6 {
                assert_eq!(a.get(i, j), -a.get(j, i));
            }
        }
    }

    #[test]
    fn antisymmetric_goe_structure() {
        let a = sample_antisymmetric_goe(7, 1).unwrap();
        for i in 0..7 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..7 {
                assert_eq!(a.get(i, j), -a.get(j, i));
            }
        }
    }

    #[test]
    fn normalization_divides_by_sqrt_n() {
        let m = sample_elliptic(4, 0.0, 1).unwrap();
        let a = sample_normalized_elliptic(4, 0.0, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.get(i, j), m.get(i, j) / 2.0);
            }
        }
        let one = sample_normalized_elliptic(1, 1.0, 9).unwrap();
        assert_eq!(one.get(0, 0), sample_elliptic(1, 1.0, 9).unwrap().get(0, 0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_normalized_elliptic(30, 0.4, 11).unwrap();
        let b = sample_normalized_elliptic(30, 0.4, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_normalized_elliptic(30, 0.4, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn goe_scalar_variance_is_two() {
        let m = 100_000u64;
        let mut s2 = 0.0;
        for seed in 0..m {
            let g = sample_goe(1, seed).unwrap().get(0, 0);
            s2 += g * g;
        }
        let var = s2 / m as f64;
        assert!((1.94..=2.06).contains(&var), "{var}");
    }

    #[test]
    fn pair_correlation_matches_rho() {
        let m = 100_000u64;
        let (mut s12, mut s11, mut s22, mut m1, mut m2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..m {
            let a = sample_elliptic(2, 0.4, seed).unwrap();
            let (x, y) = (a.get(0, 1), a.get(1, 0));
            m1 += x;
            m2 += y;
            s12 += x * y;
            s11 += x * x;
            s22 += y * y;
        }
        let k = m as f64;
        let (m1, m2) = (m1 / k, m2 / k);
        let cov = s12 / k - m1 * m2;
        let corr = cov / ((s11 / k - m1 * m1) * (s22 / k - m2 * m2)).sqrt();
        assert!((0.39..=0.41).contains(&corr), "{corr}");
    }
}
