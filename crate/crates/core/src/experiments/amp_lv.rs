//! AMP as a solver for the Lotka-Volterra equilibrium.
//!
//! With `(δ, σ, γ)` solving the scalar system, `a = (κ/δ) r`, `u⁰ = 1` and
//! `h(u, a) = (u + a)₊/δ`, the iterates satisfy `uᵏ ≈ θ_k Z` and
//! `(uᵏ + a)₊ ≈ (κ/δ)(σ_k Z + r)₊` with `σ_k = (δ/κ) θ_k → σ`.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::amp::{amp_run, onsager_coefficient, LvActivation};
use crate::density_evolution::{de_scalar_lv, sigma_sequence};
use crate::error::Result;
use crate::fixed_point::{solve_system, SystemSolution};
use crate::linalg::Matrix;
use crate::lv_stats::{pi_sample, survival_fraction, wasserstein2_1d, EmpiricalMeasure, LimitLaw};
use crate::rand_matrix::sample_normalized_elliptic;
use crate::rng::derive_seed;

/// Draws from the limit law per iteration in the Wasserstein column.
pub const AMP_LIMIT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpLvRow {
    pub k: usize,
    /// Empirical variance of `uᵏ`.
    pub var_u: f64,
    /// `θ_k²`.
    pub theta_sq: f64,
    pub rel_err: f64,
    /// `⟨1{uᵏ + a > 0}⟩ₙ`
    pub survival_proxy: f64,
    /// `P(σ_k Z + r > 0)`
    pub gamma_k: f64,
    /// `ρ d_k`, the Onsager correction applied when forming `uᵏ⁺¹`.
    pub onsager: f64,
    pub sigma_k: f64,
    /// `W₂((uᵏ + a)₊, (κ/δ)(σ_k Z + r)₊)`
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpLvReport {
    pub solution: SystemSolution,
    pub rows: Vec<AmpLvRow>,
}

fn variance(v: &[f64]) -> f64 {
    let m = crate::linalg::mean(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    crate::linalg::mean(&dev)
}

pub fn run_amp_lv(cfg: &ExperimentConfig) -> Result<AmpLvReport> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    let law = cfg.growth_law()?;
    let sol = solve_system(cfg.kappa, cfg.rho, &law)?;
    let scale = sol.scale();

    let r = cfg.growth_vector()?;
    let a_vec: Vec<f64> = r.iter().map(|v| scale * v).collect();
    let b = Matrix::column(&a_vec);
    let fam = LvActivation::new(sol.delta)?;
    let a = sample_normalized_elliptic(cfg.n, cfg.rho, derive_seed(seed, 0))?;
    let trace = amp_run(&a, &b, &vec![1.0; cfg.n], &fam, cfg.rho, cfg.depth)?;

    let scalar = de_scalar_lv(sol.delta, &law.scaled(scale)?, cfg.depth)?;
    let theta_sq = scalar.theta_squared();
    let sigmas = sigma_sequence(&scalar.theta, sol.delta, sol.kappa)?;

    let mut rows = Vec::with_capacity(cfg.depth);
    for k in 1..=cfg.depth {
        let u = trace.u(k);
        let shifted: Vec<f64> = u.iter().zip(&a_vec).map(|(x, y)| x + y).collect();
        let positive: Vec<f64> = shifted.iter().map(|v| v.max(0.0)).collect();
        let d = if k < cfg.depth { trace.onsager[k] } else { onsager_coefficient(u, &b, k, &fam)? };
        let limit = LimitLaw { sigma: sigmas[k - 1], ..LimitLaw::new(&sol, &law) };
        let reference = EmpiricalMeasure::new(pi_sample(&limit, AMP_LIMIT_SAMPLES, derive_seed(seed, k as u64)))?;
        let var_u = variance(u);
        rows.push(AmpLvRow {
            k,
            var_u,
            theta_sq: theta_sq[k - 1],
            rel_err: (var_u - theta_sq[k - 1]).abs() / theta_sq[k - 1],
            survival_proxy: survival_fraction(&shifted, 0.0),
            gamma_k: limit.gamma(),
            onsager: cfg.rho * d,
            sigma_k: sigmas[k - 1],
            w2: wasserstein2_1d(&EmpiricalMeasure::new(positive)?, &reference)?,
        });
    }
    Ok(AmpLvReport { solution: sol, rows })
}
