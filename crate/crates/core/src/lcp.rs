//! Lotka-Volterra equilibria as linear complementarity problems.
//!
//! The equilibrium `x⋆` of `ẋᵢ = xᵢ (rᵢ − xᵢ + (Σx)ᵢ)` solves
//!
//! ```text
//! x ≥ 0,   (I − Σ)x − r ≥ 0,   xᵀ((I − Σ)x − r) = 0,
//! ```
//!
//! i.e. `LCP(I − Σ, −r)`. Equivalently `x⋆ = z₊` where `z = Σz₊ + r`, which
//! is a contraction when `‖Σ‖ < 1`. Both routes are implemented: Lemke's
//! complementary pivoting and Picard iteration of the fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, spectral_norm, symmetric_part_norm, Matrix};

pub const CONTRACTION_TOL: f64 = 1e-12;
pub const CONTRACTION_MAX_ITER: usize = 100_000;

/// Find `x ≥ 0` with `w = Mx + q ≥ 0` and `xᵀw = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpInstance {
    pub m: Matrix,
    pub q: Vec<f64>,
}

impl LcpInstance {
    pub fn new(m: Matrix, q: Vec<f64>) -> Result<Self> {
        if !m.is_square() || m.rows() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "M is {}x{} and q has length {}",
                m.rows(),
                m.cols(),
                q.len()
            )));
        }
        if !m.is_finite() || q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("LCP data must be finite".into()));
        }
        Ok(Self { m, q })
    }

    /// `LCP(I − Σ, −r)`.
    pub fn lotka_volterra(sigma: &Matrix, r: &[f64]) -> Result<Self> {
        let n = sigma.rows();
        let m = Matrix::from_fn(n, sigma.cols(), |i, j| if i == j { 1.0 } else { 0.0 } - sigma.get(i, j));
        Self::new(m, r.iter().map(|v| -v).collect())
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `w = Mx + q`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut w = self.m.matvec_unchecked(x);
        for (wi, qi) in w.iter_mut().zip(&self.q) {
            *wi += qi;
        }
        w
    }

    pub fn residuals(&self, x: &[f64]) -> KktResiduals {
        let w = self.slack(x);
        KktResiduals {
            complementarity: x.iter().zip(&w).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max),
            feasibility: w.iter().map(|v| -v).fold(0.0, f64::max),
            negativity: x.iter().map(|v| -v).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `maxᵢ |xᵢ wᵢ|`
    pub complementarity: f64,
    /// `maxᵢ (−wᵢ)₊`, i.e. `maxᵢ (rᵢ − [(I − Σ)x]ᵢ)₊` for the LV instance.
    pub feasibility: f64,
    /// `maxᵢ (−xᵢ)₊`
    pub negativity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.complementarity.max(self.feasibility).max(self.negativity)
    }
}

/// Dense tableau for `w − Mz − d z₀ = q` with covering vector `d = 1`.
/// Columns `0..n` are `w`, `n..2n` are `z`, `2n` is `z₀`.
struct Tableau {
    n: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        2 * self.n + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.at(row, col);
        for j in 0..w {
            self.a[row * w + j] /= p;
        }
        self.rhs[row] /= p;
        for i in 0..self.n {
            if i == row {
                continue;
            }
            let f = self.at(i, col);
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                self.a[i * w + j] -= f * self.a[row * w + j];
            }
            self.rhs[i] -= f * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Lexicographic minimum ratio test on column `col`. Rows where `z₀` is
    /// basic win ties; remaining ties go to the lowest index.
    fn leaving_row(&self, col: usize) -> Option<usize> {
        let n = self.n;
        let scale = (0..n).map(|i| self.at(i, col).abs()).fold(0.0, f64::max);
        let eps = 1e-11 * scale.max(1e-300);
        let mut candidates: Vec<usize> = (0..n).filter(|&i| self.at(i, col) > eps).collect();
        if candidates.is_empty() {
            return None;
        }
        // Key 0 is the right-hand side, keys 1..=n the rows of B⁻¹.
        for key in 0..=n {
            let value = |i: usize| {
                let num = if key == 0 { self.rhs[i] } else { self.at(i, key - 1) };
                num / self.at(i, col)
            };
            let best = candidates.iter().map(|&i| value(i)).fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * (1.0 + best.abs());
            candidates.retain(|&i| value(i) <= best + tol);
            if key == 0 {
                if let Some(&i) = candidates.iter().find(|&&i| self.basis[i] == 2 * n) {
                    return Some(i);
                }
            }
            if candidates.len() == 1 {
                break;
            }
        }
        candidates.into_iter().min()
    }
}

/// Lemke's complementary pivoting with covering vector `1`.
pub fn lemke(inst: &LcpInstance) -> Result<Vec<f64>> {
    let n = inst.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    if inst.q.iter().all(|&v| v >= 0.0) {
        return Ok(vec![0.0; n]);
    }

    let w = 2 * n + 1;
    let mut a = vec![0.0; n * w];
    for i in 0..n {
        a[i * w + i] = 1.0;
        for j in 0..n {
            a[i * w + n + j] = -inst.m.get(i, j);
        }
        a[i * w + 2 * n] = -1.0;
    }
    let mut t = Tableau { n, a, rhs: inst.q.clone(), basis: (0..n).collect() };

    // z₀ enters; the most negative qᵢ leaves (lowest index on ties).
    let mut row = 0;
    for i in 1..n {
        if inst.q[i] < inst.q[row] {
            row = i;
        }
    }
    let mut leaving = t.basis[row];
    t.pivot(row, 2 * n);

    let max_pivots = 50 * n + 100;
    let mut pivots = 1;
    loop {
        let entering = if leaving < n { leaving + n } else { leaving - n };
        let Some(r) = t.leaving_row(entering) else {
            return Err(Error::RayTermination { pivots });
        };
        leaving = t.basis[r];
        t.pivot(r, entering);
        pivots += 1;
        if leaving == 2 * n {
            break;
        }
        if pivots > max_pivots {
            return Err(Error::NonConvergence(format!("Lemke exceeded {max_pivots} pivots")));
        }
    }

    let mut x = vec![0.0; n];
    let mut active = Vec::new();
    for (i, &b) in t.basis.iter().enumerate() {
        if (n..2 * n).contains(&b) {
            x[b - n] = t.rhs[i].max(0.0);
            active.push(b - n);
        }
    }
    Ok(polish(inst, x, &active))
}

/// Re-solves `M_SS x_S = −q_S` on the final basis and keeps the result if it
/// is at least as accurate as the tableau values.
fn polish(inst: &LcpInstance, x: Vec<f64>, active: &[usize]) -> Vec<f64> {
    if active.is_empty() {
        return x;
    }
    let k = active.len();
    let sub = Matrix::from_fn(k, k, |i, j| inst.m.get(active[i], active[j]));
    let rhs: Vec<f64> = active.iter().map(|&i| -inst.q[i]).collect();
    let Ok(xs) = solve_dense(&sub, &rhs) else {
        return x;
    };
    let mut y = vec![0.0; x.len()];
    for (&i, v) in active.iter().zip(xs) {
        y[i] = v;
    }
    if inst.residuals(&y).max() <= inst.residuals(&x).max() {
        y
    } else {
        x
    }
}

/// Picard iteration of `z ← Σz₊ + r` from `z = 0`. Requires `‖Σ‖ < 1`.
pub fn contraction_solve(sigma: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    if !sigma.is_square() || sigma.rows() != r.len() {
        return Err(Error::DimensionMismatch(format!(
            "Sigma is {}x{} and r has length {}",
            sigma.rows(),
            sigma.cols(),
            r.len()
        )));
    }
    let norm = spectral_norm(sigma)?;
    if norm >= 1.0 {
        return Err(Error::ContractionViolated { norm });
    }
    contraction_iterate(sigma, r)
}

fn contraction_iterate(sigma: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    let mut z: Vec<f64> = vec![0.0; r.len()];
    for _ in 0..CONTRACTION_MAX_ITER {
        let pos: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let mut next = sigma.matvec_unchecked(&pos);
        for (a, b) in next.iter_mut().zip(r) {
            *a += b;
        }
        let change = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next;
        if !change.is_finite() {
            return Err(Error::NonConvergence("contraction iterate is not finite".into()));
        }
        if change <= CONTRACTION_TOL {
            return Ok(z);
        }
    }
    Err(Error::NonConvergence(format!(
        "contraction did not reach {CONTRACTION_TOL} within {CONTRACTION_MAX_ITER} iterations"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Contraction,
    Lemke,
    /// Contraction when `‖Σ‖ < 1`, Lemke otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverUsed {
    Contraction,
    Lemke,
    /// The gate failed and `x⋆ = 0` was returned without solving.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub x_star: Vec<f64>,
    pub gate_passed: bool,
    /// `‖A‖`, the largest singular value.
    pub norm_a: f64,
    /// `‖(A + Aᵀ)/2‖`, the quantity the gate compares with `κ`.
    pub norm_symmetric: f64,
    pub solver: SolverUsed,
    pub residuals: KktResiduals,
}

/// `Σ = A/κ`.
pub fn interaction_matrix(a: &Matrix, kappa: f64) -> Result<Matrix> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    Ok(a.scaled(1.0 / kappa))
}

/// The two norms of `A` that decide the gate and the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    /// `‖A‖`, the largest singular value.
    pub norm_a: f64,
    /// `‖(A + Aᵀ)/2‖`.
    pub norm_symmetric: f64,
}

impl MatrixNorms {
    pub fn of(a: &Matrix) -> Result<Self> {
        Ok(Self { norm_a: spectral_norm(a)?, norm_symmetric: symmetric_part_norm(a)? })
    }
}

/// The equilibrium `x⋆` for `Σ = A/κ`, or `0` when the gate
/// `‖(A + Aᵀ)/2‖/κ < 1` fails.
///
/// The gate makes the symmetric part of `I − Σ` positive definite, so the
/// LCP has exactly one solution and Lemke's method cannot end on a ray.
pub fn equilibrium(a: &Matrix, kappa: f64, r: &[f64], solver: Solver) -> Result<EquilibriumResult> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!("A is {}x{}, not square", a.rows(), a.cols())));
    }
    equilibrium_with_norms(a, &MatrixNorms::of(a)?, kappa, r, solver)
}

/// As [`equilibrium`], reusing norms computed once for `A`.
pub fn equilibrium_with_norms(
    a: &Matrix,
    norms: &MatrixNorms,
    kappa: f64,
    r: &[f64],
    solver: Solver,
) -> Result<EquilibriumResult> {
    if !a.is_square() || a.rows() != r.len() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} and r has length {}",
            a.rows(),
            a.cols(),
            r.len()
        )));
    }
    let sigma = interaction_matrix(a, kappa)?;
    let inst = LcpInstance::lotka_volterra(&sigma, r)?;
    let MatrixNorms { norm_a, norm_symmetric } = *norms;

    if norm_symmetric / kappa >= 1.0 {
        let x_star = vec![0.0; r.len()];
        let residuals = inst.residuals(&x_star);
        return Ok(EquilibriumResult {
            x_star,
            gate_passed: false,
            norm_a,
            norm_symmetric,
            solver: SolverUsed::None,
            residuals,
        });
    }

    let contraction_ok = norm_a / kappa < 1.0;
    let use_contraction = match solver {
        Solver::Contraction if !contraction_ok => {
            return Err(Error::ContractionViolated { norm: norm_a / kappa });
        }
        Solver::Contraction => true,
        Solver::Lemke => false,
        Solver::Auto => contraction_ok,
    };
    let (x_star, used) = if use_contraction {
        let z = contraction_iterate(&sigma, r)?;
        (z.into_iter().map(|v| v.max(0.0)).collect(), SolverUsed::Contraction)
    } else {
        (lemke(&inst)?, SolverUsed::Lemke)
    };
    let residuals = inst.residuals(&x_star);
    Ok(EquilibriumResult { x_star, gate_passed: true, norm_a, norm_symmetric, solver: used, residuals })
}

/// `max |a − b|`.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
