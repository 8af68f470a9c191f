//! Elliptic approximate message passing.
//!
//! ```text
//! u¹     = A h₀(u⁰, B)
//! uᵏ⁺¹   = A h_k(uᵏ, B) − ρ ⟨∂₁h_k(uᵏ, B)⟩ₙ h_{k−1}(uᵏ⁻¹, B)
//! ```
//!
//! With `ρ = 1` and symmetric `A` this is the usual symmetric AMP; with
//! `ρ = 0` the correction vanishes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// A sequence of separable activations `h_k(u, b₁..b_p)` with their
/// derivatives in `u`.
pub trait ActivationFamily: Send + Sync {
    /// Number of parameter columns `p`.
    fn num_params(&self) -> usize;

    fn eval(&self, k: usize, u: f64, b: &[f64]) -> f64;

    /// `∂₁h_k(u, b)`.
    fn deriv(&self, k: usize, u: f64, b: &[f64]) -> f64;

    /// Points `u` where `h_k(·, b)` or its derivative jumps. Used to split
    /// quadrature panels; empty for smooth activations.
    fn kinks(&self, _k: usize, _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

/// `h(u, a) = (u + a)₊/δ` for every `k`, with the derivative at the kink set
/// to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LvActivation {
    pub delta: f64,
}

impl LvActivation {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
        }
        Ok(Self { delta })
    }
}

impl ActivationFamily for LvActivation {
    fn num_params(&self) -> usize {
        1
    }

    fn eval(&self, _k: usize, u: f64, b: &[f64]) -> f64 {
        (u + b[0]).max(0.0) / self.delta
    }

    fn deriv(&self, _k: usize, u: f64, b: &[f64]) -> f64 {
        if u + b[0] > 0.0 {
            1.0 / self.delta
        } else {
            0.0
        }
    }

    fn kinks(&self, _k: usize, b: &[f64]) -> Vec<f64> {
        vec![-b[0]]
    }
}

/// `h_k(u, b) = u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Identity {
    pub params: usize,
}

impl ActivationFamily for Identity {
    fn num_params(&self) -> usize {
        self.params
    }

    fn eval(&self, _k: usize, u: f64, _b: &[f64]) -> f64 {
        u
    }

    fn deriv(&self, _k: usize, _u: f64, _b: &[f64]) -> f64 {
        1.0
    }
}

/// `h_k(u, b) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub params: usize,
}

impl ActivationFamily for Constant {
    fn num_params(&self) -> usize {
        self.params
    }

    fn eval(&self, _k: usize, _u: f64, _b: &[f64]) -> f64 {
        self.value
    }

    fn deriv(&self, _k: usize, _u: f64, _b: &[f64]) -> f64 {
        0.0
    }
}

type ScalarFn = Arc<dyn Fn(usize, f64, &[f64]) -> f64 + Send + Sync>;
type KinkFn = Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>;

/// An activation family built from closures.
#[derive(Clone)]
pub struct FnActivation {
    params: usize,
    h: ScalarFn,
    dh: ScalarFn,
    kinks: Option<KinkFn>,
}

impl FnActivation {
    pub fn new(
        params: usize,
        h: impl Fn(usize, f64, &[f64]) -> f64 + Send + Sync + 'static,
        dh: impl Fn(usize, f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { params, h: Arc::new(h), dh: Arc::new(dh), kinks: None }
    }

    pub fn with_kinks(mut self, kinks: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.kinks = Some(Arc::new(kinks));
        self
    }
}

impl std::fmt::Debug for FnActivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnActivation").field("params", &self.params).finish_non_exhaustive()
    }
}

impl ActivationFamily for FnActivation {
    fn num_params(&self) -> usize {
        self.params
    }

    fn eval(&self, k: usize, u: f64, b: &[f64]) -> f64 {
        (self.h)(k, u, b)
    }

    fn deriv(&self, k: usize, u: f64, b: &[f64]) -> f64 {
        (self.dh)(k, u, b)
    }

    fn kinks(&self, k: usize, b: &[f64]) -> Vec<f64> {
        self.kinks.as_ref().map_or_else(Vec::new, |f| f(k, b))
    }
}

fn check_inputs(u: &[f64], b: &Matrix, fam: &dyn ActivationFamily) -> Result<()> {
    if u.len() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {} but B has {} rows",
            u.len(),
            b.rows()
        )));
    }
    if b.cols() != fam.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} columns but the activation takes {} parameters",
            b.cols(),
            fam.num_params()
        )));
    }
    Ok(())
}

fn check_matrix(a: &Matrix, n: usize) -> Result<()> {
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} but the iterate has length {n}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

/// `h_k(u, B)` applied row by row.
pub fn activate(u: &[f64], b: &Matrix, k: usize, fam: &dyn ActivationFamily) -> Result<Vec<f64>> {
    check_inputs(u, b, fam)?;
    Ok(u.iter().enumerate().map(|(i, &ui)| fam.eval(k, ui, b.row(i))).collect())
}

/// `d_k = (1/n) Σᵢ ∂₁h_k(uᵢ, Bᵢ)`.
pub fn onsager_coefficient(u: &[f64], b: &Matrix, k: usize, fam: &dyn ActivationFamily) -> Result<f64> {
    check_inputs(u, b, fam)?;
    let d: Vec<f64> = u.iter().enumerate().map(|(i, &ui)| fam.deriv(k, ui, b.row(i))).collect();
    Ok(linalg::mean(&d))
}

/// `A q − c q_prev`. Shared by every AMP variant so that they perform the
/// same floating-point operations.
pub fn corrected_product(a: &Matrix, q: &[f64], c: f64, q_prev: &[f64]) -> Vec<f64> {
    let mut out = a.matvec_unchecked(q);
    if c != 0.0 {
        for (o, p) in out.iter_mut().zip(q_prev) {
            *o -= c * p;
        }
    }
    out
}

fn check_finite(v: &[f64], iteration: usize, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, what: what.into() })
    }
}

/// `u¹ = A h₀(u⁰, B)`.
pub fn amp_init(a: &Matrix, u0: &[f64], b: &Matrix, fam: &dyn ActivationFamily) -> Result<Vec<f64>> {
    check_matrix(a, u0.len())?;
    let q0 = activate(u0, b, 0, fam)?;
    check_finite(&q0, 0, "activation")?;
    let u1 = a.matvec_unchecked(&q0);
    check_finite(&u1, 1, "iterate")?;
    Ok(u1)
}

/// `uᵏ⁺¹ = A h_k(uᵏ, B) − ρ ⟨∂₁h_k(uᵏ, B)⟩ₙ h_{k−1}(uᵏ⁻¹, B)` for `k ≥ 1`.
pub fn amp_step(
    a: &Matrix,
    u_k: &[f64],
    u_prev: &[f64],
    b: &Matrix,
    k: usize,
    rho: f64,
    fam: &dyn ActivationFamily,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("amp_step needs k >= 1; use amp_init for the first step".into()));
    }
    check_matrix(a, u_k.len())?;
    if u_prev.len() != u_k.len() {
        return Err(Error::DimensionMismatch(format!(
            "previous iterate has length {} instead of {}",
            u_prev.len(),
            u_k.len()
        )));
    }
    let q = activate(u_k, b, k, fam)?;
    let q_prev = activate(u_prev, b, k - 1, fam)?;
    let d = onsager_coefficient(u_k, b, k, fam)?;
    check_finite(&q, k, "activation")?;
    check_finite(&[d], k, "Onsager coefficient")?;
    let next = corrected_product(a, &q, rho * d, &q_prev);
    check_finite(&next, k + 1, "iterate")?;
    Ok(next)
}

/// The history of one AMP run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpTrace {
    pub rho: f64,
    pub u0: Vec<f64>,
    /// `u¹, …, u^K`.
    pub iterates: Vec<Vec<f64>>,
    /// `q⁰, …, q^{K−1}` with `q^k = h_k(uᵏ, B)`.
    pub activated: Vec<Vec<f64>>,
    /// `d₀, …, d_{K−1}` with `d₀ = 0`.
    pub onsager: Vec<f64>,
    pub params: Matrix,
}

impl AmpTrace {
    pub fn depth(&self) -> usize {
        self.iterates.len()
    }

    /// `uᵏ` for `k = 0..=K`.
    pub fn u(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.u0
        } else {
            &self.iterates[k - 1]
        }
    }
}

/// Runs `K ≥ 1` steps from `u⁰`.
pub fn amp_run(
    a: &Matrix,
    b: &Matrix,
    u0: &[f64],
    fam: &dyn ActivationFamily,
    rho: f64,
    depth: usize,
) -> Result<AmpTrace> {
    if depth == 0 {
        return Err(Error::InvalidParameter("AMP depth must be at least 1".into()));
    }
    let mut iterates = Vec::with_capacity(depth);
    let mut activated = Vec::with_capacity(depth);
    let mut onsager = Vec::with_capacity(depth);

    activated.push(activate(u0, b, 0, fam)?);
    onsager.push(0.0);
    iterates.push(amp_init(a, u0, b, fam)?);
    for k in 1..depth {
        let u_prev: &[f64] = if k == 1 { u0 } else { &iterates[k - 2] };
        let next = amp_step(a, &iterates[k - 1], u_prev, b, k, rho, fam)?;
        activated.push(activate(&iterates[k - 1], b, k, fam)?);
        onsager.push(onsager_coefficient(&iterates[k - 1], b, k, fam)?);
        iterates.push(next);
    }
    Ok(AmpTrace { rho, u0: u0.to_vec(), iterates, activated, onsager, params: b.clone() })
}
