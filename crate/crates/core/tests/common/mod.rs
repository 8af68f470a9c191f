//! Independent numerical oracles shared by the integration tests. None of
//! them call into the closed forms used by the library.

#![allow(dead_code)]

use elliptic_amp::Matrix;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    // Split into unit panels first so narrow features are not skipped.
    let panels = ((b - a).ceil() as usize).max(1) * 4;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = h / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 50)
        })
        .sum()
}

/// `E g(Z)` for standard normal `Z`, by adaptive Simpson on `[-14, 14]`.
pub fn gauss_expect<F: Fn(f64) -> f64>(g: F) -> f64 {
    simpson(|z| g(z) * normal_pdf(z), -14.0, 14.0, 1e-13)
}

/// `(δ, σ, γ)` by damped Picard iteration on `δ ← κ − ργ/δ` and
/// `σ ← √(E(σZ + r)₊²)/δ`, with all expectations from `gauss_expect`.
pub fn picard_system(kappa: f64, rho: f64, atoms: &[(f64, f64)]) -> (f64, f64, f64) {
    let second = |s: f64| -> f64 {
        atoms.iter().map(|&(r, w)| w * gauss_expect(|z| (s * z + r).max(0.0).powi(2))).sum()
    };
    let survive = |s: f64| -> f64 {
        atoms
            .iter()
            .map(|&(r, w)| w * simpson(normal_pdf, -r / s, 14.0_f64.max(-r / s + 1.0), 1e-14))
            .sum()
    };
    let mut delta = kappa;
    let mut sigma = 1.0;
    let damp = 0.5;
    for _ in 0..2000 {
        // Inner loop: σ for the current δ.
        for _ in 0..2000 {
            let next = second(sigma).sqrt() / delta;
            let s = (1.0 - damp) * sigma + damp * next;
            let done = (s - sigma).abs() < 1e-13 * sigma;
            sigma = s;
            if done {
                break;
            }
        }
        let gamma = survive(sigma);
        let next = kappa - rho * gamma / delta;
        let d = (1.0 - damp) * delta + damp * next;
        let done = (d - delta).abs() < 1e-13;
        delta = d;
        if done {
            break;
        }
    }
    (delta, sigma, survive(sigma))
}

/// Largest singular value from a dense SVD.
pub fn svd_norm(a: &Matrix) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    m.singular_values().max()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let n = xs.len() as f64;
    let cov = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
    cov / (vx * vy).sqrt()
}

/// Brute-force `W₂` between equal-size samples over every matching.
pub fn brute_force_w2(a: &[f64], b: &[f64]) -> f64 {
    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    permutations(a.len())
        .into_iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).powi(2)).sum::<f64>() / a.len() as f64)
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Relative error with an absolute floor at 1.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
