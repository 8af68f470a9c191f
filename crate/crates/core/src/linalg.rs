//! Dense row-major matrices and the few kernels the rest of the crate needs.
//!
//! Reductions use a fixed pairwise tree so results do not depend on how rows
//! are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

const PARALLEL_ROWS: usize = 256;
const LEAF: usize = 32;

/// Pairwise (tree) summation with a fixed split rule.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut lanes = [0.0f64; 4];
        let mut chunks = xs.chunks_exact(4);
        for c in &mut chunks {
            lanes[0] += c[0];
            lanes[1] += c[1];
            lanes[2] += c[2];
            lanes[3] += c[3];
        }
        let mut tail = 0.0;
        for &x in chunks.remainder() {
            tail += x;
        }
        return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Dot product reduced with the same tree as [`pairwise_sum`].
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= LEAF {
        let mut lanes = [0.0f64; 4];
        let mut ca = a.chunks_exact(4);
        let mut cb = b.chunks_exact(4);
        for (x, y) in (&mut ca).zip(&mut cb) {
            lanes[0] += x[0] * y[0];
            lanes[1] += x[1] * y[1];
            lanes[2] += x[2] * y[2];
            lanes[3] += x[3] * y[3];
        }
        let mut tail = 0.0;
        for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
            tail += x * y;
        }
        return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
    }
    let mid = a.len() / 2;
    dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { rows: n_rows, cols: n_cols, data: rows.concat() })
    }

    /// A single column `n x 1` matrix.
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(self.matvec_unchecked(x))
    }

    pub(crate) fn matvec_unchecked(&self, x: &[f64]) -> Vec<f64> {
        if self.rows >= PARALLEL_ROWS {
            (0..self.rows).into_par_iter().map(|i| dot(self.row(i), x)).collect()
        } else {
            (0..self.rows).map(|i| dot(self.row(i), x)).collect()
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::InvalidInput("symmetric part of a non-square matrix".into()));
        }
        let n = self.rows;
        Ok(Self::from_fn(n, n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i))))
    }

    /// `P A Pᵀ` for the permutation sending index `i` to `perm[i]`, i.e. the
    /// result has entry `(i, j)` equal to `A[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if !self.is_square() || perm.len() != self.rows {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| self.get(perm[i], perm[j])))
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Solves `M x = b` for a small dense system by LU with partial pivoting.
pub fn solve_dense(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !m.is_square() || m.rows() != b.len() {
        return Err(Error::DimensionMismatch("linear solve".into()));
    }
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let lu = m.to_nalgebra().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::NoSolution("singular system".into()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_symmetric(m: &Matrix) -> f64 {
    if m.rows() == 0 {
        return f64::INFINITY;
    }
    m.to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub const SPECTRAL_REL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// Largest singular value `‖A‖₂`.
///
/// Lanczos with full reorthogonalization on `AᵀA`, started from the
/// normalized all-ones vector. When the Krylov space closes before the
/// estimate has converged, the iteration continues from a deterministic
/// pseudo-random direction orthogonal to everything seen so far.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "spectral norm of a non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let at = a.transpose();
    let gram = |v: &[f64]| at.matvec_unchecked(&a.matvec_unchecked(v));
    let lambda = lanczos_largest(n, gram)?;
    Ok(lambda.max(0.0).sqrt())
}

/// `‖(A + Aᵀ)/2‖₂`, the norm of the symmetric part.
pub fn symmetric_part_norm(a: &Matrix) -> Result<f64> {
    spectral_norm(&a.symmetric_part()?)
}

fn lanczos_largest(n: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let max_steps = n.min(SPECTRAL_MAX_ITER);
    let restart = Stream::new(0x5eed_1a2c, 0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut scale = 0.0f64;
    let mut estimate = 0.0f64;
    let mut restarts = 0u64;

    for step in 0..max_steps {
        let mut w = op(&v);
        let alpha = dot(&w, &v);
        basis.push(v);
        alphas.push(alpha);
        scale = scale.max(alpha.abs());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm2(&w);
        let done = basis.len() == n;
        let breakdown = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if done || (!breakdown && (step < 8 || step % 4 == 3)) {
            let (theta, last) = tridiagonal_top(&alphas, &betas);
            estimate = theta;
            if done || beta * last.abs() <= SPECTRAL_REL_TOL * theta.abs().max(f64::MIN_POSITIVE) {
                return Ok(theta);
            }
        }
        if breakdown {
            // invariant subspace: continue from a fresh orthogonal direction
            let mut fresh = None;
            for _ in 0..4 {
                let mut r: Vec<f64> = (0..n as u64)
                    .map(|i| restart.normal(restarts * n as u64 + i))
                    .collect();
                restarts += 1;
                for _ in 0..2 {
                    for q in &basis {
                        let c = dot(&r, q);
                        for (ri, qi) in r.iter_mut().zip(q) {
                            *ri -= c * qi;
                        }
                    }
                }
                let nr = norm2(&r);
                if nr > 1e-8 {
                    fresh = Some(r.into_iter().map(|x| x / nr).collect::<Vec<_>>());
                    break;
                }
            }
            match fresh {
                Some(r) => {
                    betas.push(0.0);
                    v = r;
                }
                None => return Ok(tridiagonal_top(&alphas, &betas).0),
            }
        } else {
            betas.push(beta);
            v = w.into_iter().map(|x| x / beta).collect();
        }
    }
    Err(Error::NonConvergence(format!(
        "Lanczos did not converge in {max_steps} steps (estimate {estimate})"
    )))
}

/// Largest eigenvalue of the symmetric tridiagonal matrix and the last
/// component of its unit eigenvector.
fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    (theta, eig.eigenvectors[(m - 1, idx)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        assert_eq!(dot(&xs, &vec![1.0; 1000]), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn spectral_norm_of_simple_matrices() {
        assert!((spectral_norm(&Matrix::identity(3)).unwrap() - 1.0).abs() < 1e-12);
        let d = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::zeros(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_when_ones_is_in_the_kernel() {
        // all-ones start vector is annihilated; the top singular value is 2
        let a = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!((spectral_norm(&a).unwrap() - 2.0).abs() < 1e-12);
        let b = Matrix::from_rows(&[
            vec![1.0, -1.0, 0.0],
            vec![0.0, 1.0, -1.0],
            vec![-1.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((spectral_norm(&b).unwrap() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rejects_bad_input() {
        let r = Matrix::zeros(2, 3);
        assert!(matches!(spectral_norm(&r), Err(Error::InvalidInput(_))));
        let mut m = Matrix::identity(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(spectral_norm(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn transpose_and_permutation() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.transpose().to_rows(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
        let p = a.permuted(&[1, 0]).unwrap();
        assert_eq!(p.to_rows(), vec![vec![4.0, 3.0], vec![2.0, 1.0]]);
        assert!(a.symmetric_part().unwrap().is_symmetric());
    }

    #[test]
    fn dense_solve() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve_dense(&m, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!((min_eigenvalue_symmetric(&m) - (5.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
    }
}
