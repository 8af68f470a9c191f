//! Gaussian expectations of piecewise-smooth integrands.
//!
//! `E g(Z)` is written as `∫ g(sξ) φ(ξ) dξ` over `ξ ∈ [−10, 10]` and split
//! into unit panels, with extra breakpoints at the integrand's kinks, each
//! panel integrated by Gauss-Legendre. Splitting at kinks keeps every panel
//! smooth, so the rule converges at its polynomial rate even for
//! integrands like `(θZ + a)₊²`. Every expectation is computed at two
//! orders and rejected if they disagree.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::fixed_point::phi;

/// Half-width of the standardized integration range; `φ(10) ≈ 7.7e−23`.
pub const SPAN: f64 = 10.0;
pub const BASE_ORDER: usize = 16;
/// Largest allowed difference between the base and doubled-order results.
pub const DOUBLING_TOL: f64 = 1e-6;

fn rule(order: usize) -> &'static GaussLegendre {
    static BASE: OnceLock<GaussLegendre> = OnceLock::new();
    static DOUBLED: OnceLock<GaussLegendre> = OnceLock::new();
    let make = || GaussLegendre::new(NonZeroUsize::new(order).expect("nonzero order"));
    match order {
        BASE_ORDER => BASE.get_or_init(make),
        o if o == 2 * BASE_ORDER => DOUBLED.get_or_init(make),
        _ => panic!("unsupported quadrature order {order}"),
    }
}

/// Sorted panel breakpoints on `[−SPAN, SPAN]`: the integers plus the given
/// kinks (in standardized coordinates).
fn breakpoints(kinks: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = (-(SPAN as i64)..=(SPAN as i64)).map(|i| i as f64).collect();
    pts.extend(kinks.into_iter().filter(|k| k.is_finite() && k.abs() < SPAN));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    pts
}

/// `∫ g(ξ) φ(ξ) dξ` over `[−SPAN, SPAN]` with panels split at `kinks`.
fn standard_integral(order: usize, kinks: impl IntoIterator<Item = f64>, mut g: impl FnMut(f64) -> f64) -> f64 {
    let r = rule(order);
    let pts = breakpoints(kinks);
    pts.windows(2)
        .map(|w| r.integrate(w[0], w[1], |xi| g(xi) * phi(xi)))
        .sum()
}

fn checked(lo: f64, hi: f64) -> Result<f64> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Quadrature("non-finite integrand".into()));
    }
    let diff = (hi - lo).abs();
    if diff > DOUBLING_TOL {
        return Err(Error::Quadrature(format!("order doubling changed the result by {diff:e}")));
    }
    Ok(hi)
}

/// `E g(Z)` for `Z ~ N(0, var)`. `kinks` are the points (in `Z`
/// coordinates) where `g` is not smooth.
pub fn expect_1d(var: f64, kinks: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    if !(var >= 0.0) || !var.is_finite() {
        return Err(Error::Quadrature(format!("invalid variance {var}")));
    }
    if var == 0.0 {
        return Ok(g(0.0));
    }
    let s = var.sqrt();
    let run = |order| standard_integral(order, kinks.iter().map(|k| k / s), |xi| g(s * xi));
    checked(run(BASE_ORDER), run(2 * BASE_ORDER))
}

/// Relative size below which a conditional variance counts as zero.
const RANK_TOL: f64 = 1e-12;

/// `E g(Z₁, Z₂)` for a centred Gaussian pair with covariance
/// `[[c11, c12], [c12, c22]]`. `kinks1` and `kinks2` are the kink locations of
/// `g` in each argument.
pub fn expect_2d(
    cov: [[f64; 2]; 2],
    kinks1: &[f64],
    kinks2: &[f64],
    g: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let (c11, c12, c22) = (cov[0][0], cov[0][1], cov[1][1]);
    if !(c11 >= 0.0 && c22 >= 0.0) || !c12.is_finite() || !c11.is_finite() || !c22.is_finite() {
        return Err(Error::Quadrature(format!("invalid covariance {cov:?}")));
    }
    if c11 == 0.0 {
        return expect_1d(c22, kinks2, |z2| g(0.0, z2));
    }
    let s1 = c11.sqrt();
    let c = c12 / s1;
    let cond = c22 - c * c;
    if cond < -RANK_TOL * c22.max(c11) {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: cond });
    }
    if cond <= RANK_TOL * c22.max(c11) {
        // Z₂ = (c12/c11) Z₁ almost surely.
        let slope = c12 / c11;
        let mut kinks: Vec<f64> = kinks1.to_vec();
        if slope != 0.0 {
            kinks.extend(kinks2.iter().map(|k| k / slope));
        }
        return expect_1d(c11, &kinks, |z1| g(z1, slope * z1));
    }
    let s2 = cond.sqrt();

    let run = |order| {
        standard_integral(order, kinks1.iter().map(|k| k / s1), |xi1| {
            let z1 = s1 * xi1;
            let shift = c * xi1;
            standard_integral(order, kinks2.iter().map(|k| (k - shift) / s2), |xi2| g(z1, shift + s2 * xi2))
        })
    };
    checked(run(BASE_ORDER), run(2 * BASE_ORDER))
}
