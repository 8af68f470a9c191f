//! Density evolution for elliptic AMP.
//!
//! The iterates `uᵏ` behave like a centred Gaussian vector `(Z₁, …, Z_k)`
//! with covariance `Rᵏ`, where
//!
//! ```text
//! R_ij = E[h_{i−1}(Z_{i−1}, b) h_{j−1}(Z_{j−1}, b)],   Z₀ = ū,
//! ```
//!
//! and `Z` is independent of `(ū, b)`. `Rᵏ` is the upper-left block of
//! `Rᵏ⁺¹`, so each extension only fills one new row.
//!
//! For the Lotka-Volterra activation the diagonal reduces to the scalar
//! recursion `θ²_{k+1} = E(θ_k Z + ā)₊²/δ²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::ActivationFamily;
use crate::error::{Error, Result};
use crate::fixed_point::{positive_part_second_moment, GrowthLaw};
use crate::linalg::{min_eigenvalue_symmetric, solve_dense, Matrix};
use crate::quadrature::{expect_1d, expect_2d};

/// Eigenvalue slack for the positive semidefinite check.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAtom {
    pub u: f64,
    pub b: Vec<f64>,
    pub weight: f64,
}

/// A finite atomic law for `(ū, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    atoms: Vec<JointAtom>,
}

impl JointLaw {
    pub fn new(atoms: Vec<JointAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("joint law has no atoms".into()));
        }
        let p = atoms[0].b.len();
        let mut total = 0.0;
        for a in &atoms {
            if a.b.len() != p {
                return Err(Error::DimensionMismatch("atoms have different parameter counts".into()));
            }
            if !(a.weight > 0.0) || !a.u.is_finite() || a.b.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("atoms need finite values and positive weights".into()));
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// `ū ≡ u0` and `b = (r)` with `r` drawn from `law`.
    pub fn with_growth(u0: f64, law: &GrowthLaw) -> Result<Self> {
        Self::new(law.atoms().iter().map(|&(r, w)| JointAtom { u: u0, b: vec![r], weight: w }).collect())
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn num_params(&self) -> usize {
        self.atoms[0].b.len()
    }

    fn expect(&self, f: impl Fn(&JointAtom) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for a in &self.atoms {
            total += a.weight * f(a)?;
        }
        Ok(total)
    }
}

/// The covariance `Rᵏ` of the Gaussian limit of `(u¹, …, uᵏ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DECovariance {
    r: Matrix,
    pub provenance: String,
}

impl DECovariance {
    pub fn order(&self) -> usize {
        self.r.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    /// `R_ij` with 1-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r.get(i - 1, j - 1)
    }

    /// `σ_k² = R_kk`, 1-based.
    pub fn variance(&self, k: usize) -> f64 {
        self.get(k, k)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (1..=self.order()).map(|k| self.variance(k)).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue_symmetric(&self.r)
    }

    /// The `m×m` upper-left block.
    pub fn leading(&self, m: usize) -> Result<DECovariance> {
        if m == 0 || m > self.order() {
            return Err(Error::InvalidDimension(format!("block of order {m} from order {}", self.order())));
        }
        Ok(DECovariance {
            r: Matrix::from_fn(m, m, |i, j| self.r.get(i, j)),
            provenance: self.provenance.clone(),
        })
    }

    /// For order `k + 1 ≥ 2`, the regression of `Z_{k+1}` on `(Z₁, …, Z_k)`:
    /// returns `(ᾱᵏ, σ̄²_{k+1})` with `ᾱᵏ = (Rᵏ)⁻¹ R_{1:k, k+1}` and
    /// `σ̄²_{k+1} = R_{k+1,k+1} − R_{k+1,1:k} ᾱᵏ`.
    pub fn schur(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.order();
        if n < 2 {
            return Err(Error::InvalidDimension("the Schur complement needs order >= 2".into()));
        }
        let k = n - 1;
        let head = Matrix::from_fn(k, k, |i, j| self.r.get(i, j));
        let col: Vec<f64> = (0..k).map(|i| self.r.get(i, k)).collect();
        let alpha = solve_dense(&head, &col)?;
        let proj: f64 = col.iter().zip(&alpha).map(|(c, a)| c * a).sum();
        Ok((alpha, self.r.get(k, k) - proj))
    }

    fn check_psd(&self) -> Result<()> {
        if !self.r.is_symmetric() {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let min_eigenvalue = self.min_eigenvalue();
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(())
    }
}

fn check_family(fam: &dyn ActivationFamily, law: &JointLaw) -> Result<()> {
    if fam.num_params() != law.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "activation takes {} parameters, law provides {}",
            fam.num_params(),
            law.num_params()
        )));
    }
    Ok(())
}

fn provenance(order: usize, fam: &dyn ActivationFamily, law: &JointLaw) -> String {
    format!("order {order}; {} atoms; {} parameter columns", law.atoms().len(), fam.num_params())
}

/// `R¹ = E h₀(ū, b)²`.
pub fn de_init(fam: &dyn ActivationFamily, law: &JointLaw) -> Result<DECovariance> {
    check_family(fam, law)?;
    let r11 = law.expect(|a| Ok(fam.eval(0, a.u, &a.b).powi(2)))?;
    Ok(DECovariance { r: Matrix::from_fn(1, 1, |_, _| r11), provenance: provenance(1, fam, law) })
}

/// `Rᵏ⁺¹` from `Rᵏ`. Existing entries are copied, not recomputed.
pub fn de_extend(rk: &DECovariance, fam: &dyn ActivationFamily, law: &JointLaw) -> Result<DECovariance> {
    check_family(fam, law)?;
    rk.check_psd()?;
    let k = rk.order();
    let var_k = rk.variance(k);

    // Column j (1-based) of the new row: E[h_k(Z_k) h_{j−1}(Z_{j−1})].
    let new_row: Vec<f64> = (1..=k + 1)
        .into_par_iter()
        .map(|j| {
            law.expect(|a| {
                let b = &a.b;
                let kinks_k = fam.kinks(k, b);
                if j == 1 {
                    let h0 = fam.eval(0, a.u, b);
                    if h0 == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(h0 * expect_1d(var_k, &kinks_k, |z| fam.eval(k, z, b))?)
                } else if j == k + 1 {
                    expect_1d(var_k, &kinks_k, |z| fam.eval(k, z, b).powi(2))
                } else {
                    let i = j - 1;
                    let cov = [[rk.variance(i), rk.get(i, k)], [rk.get(i, k), var_k]];
                    expect_2d(cov, &fam.kinks(i, b), &kinks_k, |zi, zk| fam.eval(i, zi, b) * fam.eval(k, zk, b))
                }
            })
        })
        .collect::<Result<_>>()?;

    let r = Matrix::from_fn(k + 1, k + 1, |i, j| {
        if i < k && j < k {
            rk.r.get(i, j)
        } else if i == k {
            new_row[j]
        } else {
            new_row[i]
        }
    });
    Ok(DECovariance { r, provenance: provenance(k + 1, fam, law) })
}

/// `R^K` for `K ≥ 1`.
pub fn de_run(fam: &dyn ActivationFamily, law: &JointLaw, order: usize) -> Result<DECovariance> {
    if order == 0 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    let mut r = de_init(fam, law)?;
    for _ in 1..order {
        r = de_extend(&r, fam, law)?;
    }
    Ok(r)
}

/// The scalar recursion for the Lotka-Volterra activation `(u + ā)₊/δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDE {
    pub delta: f64,
    pub a_law: GrowthLaw,
    /// `θ₁, …, θ_K`.
    pub theta: Vec<f64>,
}

impl ScalarDE {
    pub fn theta_squared(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t * t).collect()
    }
}

/// `θ₁² = E(1 + ā)₊²/δ²` and `θ²_{k+1} = E(θ_k Z + ā)₊²/δ²`, via the closed
/// form `E(θZ + a)₊² = θ² f(−a/θ)`.
pub fn de_scalar_lv(delta: f64, a_law: &GrowthLaw, depth: usize) -> Result<ScalarDE> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    a_law.validate()?;
    let d2 = delta * delta;
    let mut theta = Vec::with_capacity(depth);
    let first = a_law.expect(|a| (1.0 + a).max(0.0).powi(2)) / d2;
    theta.push(first.sqrt());
    while theta.len() < depth {
        let t = *theta.last().unwrap();
        let next = a_law.expect(|a| positive_part_second_moment(t, a)) / d2;
        theta.push(next.sqrt());
    }
    Ok(ScalarDE { delta, a_law: a_law.clone(), theta })
}

/// `σ_k = (δ/κ) θ_k`.
pub fn sigma_sequence(theta: &[f64], delta: f64, kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    let c = delta / kappa;
    Ok(theta.iter().map(|t| c * t).collect())
}
