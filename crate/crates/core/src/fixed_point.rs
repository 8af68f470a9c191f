//! The scalar system for `(δ, σ, γ)`:
//!
//! ```text
//! κ  = δ + ρ γ / δ
//! σ² = E(σZ + r)₊² / δ²
//! γ  = P(σZ + r > 0)
//! ```
//!
//! With `x = −1/σ` the second and third equations become `δ² = E f(r x)` and
//! `γ = E Q(r x)`, where `Q` is the standard normal tail and
//! `f(x) = (1 + x²) Q(x) − x φ(x)`. Since `f` is decreasing, `σ(δ)` is found
//! by bisection; `δ` then solves `h(δ) = δ + ρ γ(δ)/δ = κ`, which is
//! increasing in `δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Lower end of the admissible range for `δ`.
pub const DELTA_MIN: f64 = std::f64::consts::FRAC_1_SQRT_2;

const SIGMA_RESIDUAL_TOL: f64 = 1e-12;
const SIGMA_WIDTH_TOL: f64 = 1e-14;
const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 400;

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Q(x) = P(Z > x)`.
pub fn q_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `f(x) = (1 + x²) Q(x) − x φ(x) = E(Z − x)₊²`.
pub fn f_aux(x: f64) -> f64 {
    (1.0 + x * x) * q_tail(x) - x * phi(x)
}

/// `f′(x) = 2 (x Q(x) − φ(x))`.
pub fn f_aux_derivative(x: f64) -> f64 {
    2.0 * (x * q_tail(x) - phi(x))
}

/// `E(θZ + a)₊² = θ² f(−a/θ)`, with the `θ = 0` limit `a₊²`.
pub fn positive_part_second_moment(theta: f64, a: f64) -> f64 {
    if theta == 0.0 {
        let p = a.max(0.0);
        return p * p;
    }
    theta * theta * f_aux(-a / theta)
}

/// `P(θZ + a > 0)`, with the `θ = 0` limit `1{a > 0}`.
pub fn positive_probability(theta: f64, a: f64) -> f64 {
    if theta == 0.0 {
        return if a > 0.0 { 1.0 } else { 0.0 };
    }
    q_tail(-a / theta)
}

/// A finite atomic law of nonnegative growth rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthLaw {
    atoms: Vec<(f64, f64)>,
}

impl GrowthLaw {
    /// Atoms are `(value, weight)` pairs.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let law = Self { atoms };
        law.validate()?;
        Ok(law)
    }

    pub fn constant(r: f64) -> Result<Self> {
        Self::new(vec![(r, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter("growth law has no atoms".into()));
        }
        let mut total = 0.0;
        for &(v, w) in &self.atoms {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("growth rate {v} must be finite and nonnegative")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!("atom weight {w} must be positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("atom weights sum to {total}, not 1")));
        }
        if self.atoms.iter().all(|&(v, _)| v == 0.0) {
            return Err(Error::InvalidParameter("growth law is a point mass at zero".into()));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `E g(r)`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(v, w)| w * g(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|v| v * v)
    }

    /// The law of `c·r`; used for `ā = (κ/δ) r`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(v, w)| (c * v, w)).collect())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta <= DELTA_MIN {
        return Err(Error::OutOfDomain(format!("delta = {delta} must exceed 1/sqrt(2)")));
    }
    Ok(())
}

/// `E f(−r/σ)`, decreasing in `σ` from `+∞` to `1/2`.
fn mean_f(sigma: f64, law: &GrowthLaw) -> f64 {
    law.expect(|r| f_aux(-r / sigma))
}

/// The unique `σ > 0` with `δ² = E f(−r/σ)`.
pub fn solve_sigma(delta: f64, law: &GrowthLaw) -> Result<f64> {
    check_delta(delta)?;
    let target = delta * delta;
    let g = |s: f64| mean_f(s, law) - target;

    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NoSolution(format!("no upper bracket for sigma at delta = {delta}")));
        }
    }
    doublings = 0;
    while g(lo) < 0.0 {
        lo *= 0.5;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoSolution(format!("no lower bracket for sigma at delta = {delta}")));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= SIGMA_RESIDUAL_TOL || hi - lo <= SIGMA_WIDTH_TOL * mid {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `γ(δ) = E Q(−r/σ(δ))`.
pub fn gamma_of(delta: f64, law: &GrowthLaw) -> Result<f64> {
    let sigma = solve_sigma(delta, law)?;
    Ok(gamma_at_sigma(sigma, law))
}

pub fn gamma_at_sigma(sigma: f64, law: &GrowthLaw) -> f64 {
    law.expect(|r| q_tail(-r / sigma))
}

/// `x′(δ) = δ x / (δ² − γ)` with `x = −1/σ(δ)`.
pub fn x_derivative(delta: f64, law: &GrowthLaw) -> Result<f64> {
    let sigma = solve_sigma(delta, law)?;
    let x = -1.0 / sigma;
    let gamma = gamma_at_sigma(sigma, law);
    let denom = delta * delta - gamma;
    assert!(denom > 0.0, "gamma(delta) >= delta^2 at delta = {delta}");
    Ok(delta * x / denom)
}

/// `γ′(δ) = −x′(δ) E[r φ(r x)]`.
pub fn gamma_derivative(delta: f64, law: &GrowthLaw) -> Result<f64> {
    let sigma = solve_sigma(delta, law)?;
    let x = -1.0 / sigma;
    let xp = x_derivative(delta, law)?;
    Ok(-xp * law.expect(|r| r * phi(r * x)))
}

/// `h(δ) = δ + ρ γ(δ)/δ`.
pub fn h_of(delta: f64, rho: f64, law: &GrowthLaw) -> Result<f64> {
    Ok(delta + rho * gamma_of(delta, law)? / delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `δ + ργ/δ − κ`
    pub kappa: f64,
    /// `σ² − E(σZ + r)₊²/δ²`
    pub sigma: f64,
    /// `γ − P(σZ + r > 0)`
    pub gamma: f64,
    /// `1 + ργ/δ² − κ/δ`
    pub scale_identity: f64,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.kappa.abs().max(self.sigma.abs()).max(self.gamma.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSolution {
    pub delta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub rho: f64,
    pub residuals: Residuals,
    /// `κ > √(2(1+ρ))`. When false the system still has a solution but a
    /// stable equilibrium is not guaranteed.
    pub stable_equilibrium_guaranteed: bool,
}

impl SystemSolution {
    /// `κ/δ`, equal to `1 + ργ/δ²`.
    pub fn scale(&self) -> f64 {
        self.kappa / self.delta
    }

    /// `x = −1/σ`.
    pub fn x(&self) -> f64 {
        -1.0 / self.sigma
    }
}

/// Threshold on `κ` below which the system has no solution.
pub fn kappa_threshold(rho: f64) -> f64 {
    (1.0 + rho) * DELTA_MIN
}

/// Threshold on `κ` above which the equilibrium is stable.
pub fn stability_threshold(rho: f64) -> f64 {
    (2.0 * (1.0 + rho)).sqrt()
}

fn residuals(delta: f64, sigma: f64, gamma: f64, kappa: f64, rho: f64, law: &GrowthLaw) -> Residuals {
    let second = law.expect(|r| positive_part_second_moment(sigma, r));
    Residuals {
        kappa: delta + rho * gamma / delta - kappa,
        sigma: sigma * sigma - second / (delta * delta),
        gamma: gamma - law.expect(|r| positive_probability(sigma, r)),
        scale_identity: 1.0 + rho * gamma / (delta * delta) - kappa / delta,
    }
}

/// Solves the system for `(δ, σ, γ)` given `κ > (1+ρ)/√2`.
pub fn solve_system(kappa: f64, rho: f64, law: &GrowthLaw) -> Result<SystemSolution> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} is outside [-1, 1]")));
    }
    if !kappa.is_finite() || kappa <= kappa_threshold(rho) {
        return Err(Error::OutOfDomain(format!(
            "kappa = {kappa} must exceed (1 + rho)/sqrt(2) = {}",
            kappa_threshold(rho)
        )));
    }
    law.validate()?;

    let delta = if rho == 0.0 { kappa } else { solve_delta(kappa, rho, law)? };
    let sigma = solve_sigma(delta, law)?;
    let gamma = gamma_at_sigma(sigma, law);
    Ok(SystemSolution {
        delta,
        sigma,
        gamma,
        kappa,
        rho,
        residuals: residuals(delta, sigma, gamma, kappa, rho, law),
        stable_equilibrium_guaranteed: kappa > stability_threshold(rho),
    })
}

fn solve_delta(kappa: f64, rho: f64, law: &GrowthLaw) -> Result<f64> {
    let g = |d: f64| h_of(d, rho, law).map(|h| h - kappa);

    let mut offset = 1e-6;
    let mut lo = DELTA_MIN + offset;
    while g(lo)? > 0.0 {
        offset *= 0.1;
        lo = DELTA_MIN + offset;
        if offset < 1e-15 {
            return Err(Error::NoSolution(format!("kappa = {kappa} is too close to the threshold")));
        }
    }
    let mut hi = kappa.max(2.0);
    let mut doublings = 0;
    while g(hi)? < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoSolution(format!("no upper bracket for delta at kappa = {kappa}")));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
