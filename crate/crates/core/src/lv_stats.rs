//! Limit laws of the equilibrium and the empirical statistics compared with
//! them.
//!
//! The empirical law of `x⋆` approaches `π = L((κ/δ)(σZ + r)₊)`, which has
//! an atom of mass `1 − γ` at zero and density `γ f_surv` on `(0, ∞)`, with
//!
//! ```text
//! f_surv(y) = (δ/κ) f_{σZ+r}(δy/κ) / γ,   y > 0.
//! ```
//!
//! With block-constant growth rates each block `j` has its own limit `π_j`,
//! obtained by replacing `r` with the block's law while keeping `(δ, σ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{phi, q_tail, GrowthLaw, SystemSolution};
use crate::rng::{role, Stream};

/// Sizes `n₁, …, n_q` of consecutive index blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidParameter("blocks must be nonempty".into()));
        }
        Ok(Self { sizes })
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// Sizes closest to `fractions·n` that sum to `n`, by largest remainder
    /// (lowest index first on ties).
    pub fn from_fractions(n: usize, fractions: &[f64]) -> Result<Self> {
        let total: f64 = fractions.iter().sum();
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("block fractions {fractions:?} must be positive and sum to 1")));
        }
        let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut remaining = n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..fractions.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            sizes[i] += 1;
            remaining -= 1;
        }
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `c_j = n_j/n`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.sizes.iter().map(|&s| s as f64 / n).collect()
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }

    /// The vector whose block `j` is constant `values[j]`.
    pub fn expand(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} blocks",
                values.len(),
                self.num_blocks()
            )));
        }
        Ok(self.sizes.iter().zip(values).flat_map(|(&s, &v)| std::iter::repeat_n(v, s)).collect())
    }
}

/// A sorted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    values: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("empirical measure needs finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::linalg::mean(&self.values)
    }

    /// Type-7 (linear interpolation) sample quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }
}

/// `π` for a growth law `r`, given `(δ, σ)` and the scale `κ/δ` from a
/// solved system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub delta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub law: GrowthLaw,
}

impl LimitLaw {
    pub fn new(solution: &SystemSolution, law: &GrowthLaw) -> Self {
        Self { delta: solution.delta, sigma: solution.sigma, kappa: solution.kappa, law: law.clone() }
    }

    /// The law for one block: same `(δ, σ, κ)`, growth law `r_j`.
    pub fn block(&self, law: &GrowthLaw) -> Self {
        Self { law: law.clone(), ..self.clone() }
    }

    /// `κ/δ`.
    pub fn scale(&self) -> f64 {
        self.kappa / self.delta
    }

    /// `γ = P(σZ + r > 0)` under this law.
    pub fn gamma(&self) -> f64 {
        self.law.expect(|r| q_tail(-r / self.sigma))
    }

    /// Density of `σZ + r`.
    pub fn shifted_density(&self, y: f64) -> f64 {
        let s = self.sigma;
        self.law.expect(|r| phi((y - r) / s) / s)
    }
}

/// Draws of `(κ/δ)(σZ + r)₊`. Atom choice and Gaussian use separate streams.
pub fn pi_sample(law: &LimitLaw, m: usize, seed: u64) -> Vec<f64> {
    let gauss = Stream::new(seed, role::LIMIT_GAUSSIAN);
    let atom = Stream::new(seed, role::LIMIT_ATOM);
    (0..m as u64).map(|i| pi_draw(law, &gauss, &atom, i)).collect()
}

fn pi_draw(law: &LimitLaw, gauss: &Stream, atom: &Stream, i: u64) -> f64 {
    let r = pick_atom(law.law.atoms(), atom.uniform(i));
    law.scale() * (law.sigma * gauss.normal(i) + r).max(0.0)
}

fn pick_atom(atoms: &[(f64, f64)], u: f64) -> f64 {
    let mut acc = 0.0;
    for &(v, w) in atoms {
        acc += w;
        if u < acc {
            return v;
        }
    }
    atoms[atoms.len() - 1].0
}

/// `m` draws from `f_surv`: draws of `π` conditioned to be positive, taken
/// in counter order.
pub fn f_surv_sample(law: &LimitLaw, m: usize, seed: u64) -> Vec<f64> {
    let gauss = Stream::new(seed, role::LIMIT_GAUSSIAN);
    let atom = Stream::new(seed, role::LIMIT_ATOM);
    let mut out = Vec::with_capacity(m);
    let mut i = 0u64;
    while out.len() < m {
        let y = pi_draw(law, &gauss, &atom, i);
        if y > 0.0 {
            out.push(y);
        }
        i += 1;
    }
    out
}

/// `f_surv(y) = (δ/κ) f_{σZ+r}(δy/κ) 1{y > 0} / γ`.
pub fn f_surv_density(law: &LimitLaw, y: f64) -> f64 {
    if !(y > 0.0) {
        return 0.0;
    }
    let s = law.scale();
    law.shifted_density(y / s) / (s * law.gamma())
}

/// `f^j_surv` for block `j` with growth law `block_law`.
pub fn f_surv_block(law: &LimitLaw, block_law: &GrowthLaw, y: f64) -> f64 {
    f_surv_density(&law.block(block_law), y)
}

/// `Σ_j (c_j γ_j/γ) f^j_surv(y)` and the weights `c_j γ_j/γ`.
pub fn f_surv_mixture(law: &LimitLaw, blocks: &[(f64, GrowthLaw)], y: f64) -> (f64, Vec<f64>) {
    let gamma = law.gamma();
    let weights: Vec<f64> = blocks.iter().map(|(c, l)| c * law.block(l).gamma() / gamma).collect();
    let value = blocks.iter().zip(&weights).map(|((_, l), w)| w * f_surv_block(law, l, y)).sum();
    (value, weights)
}

/// Fraction of entries strictly above `eps`.
pub fn survival_fraction(x: &[f64], eps: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().filter(|&&v| v > eps).count() as f64 / x.len() as f64
}

/// `W₂` between two empirical measures on the line, computed exactly from
/// their quantile functions: `W₂² = ∫₀¹ (F_a⁻¹(t) − F_b⁻¹(t))² dt`. For equal
/// sizes this is the sorted coupling `√((1/m) Σ (a₍ᵢ₎ − b₍ᵢ₎)²)`.
pub fn wasserstein2_1d(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("Wasserstein distance of an empty measure".into()));
    }
    let (x, y) = (a.values(), b.values());
    let (m, n) = (x.len(), y.len());
    if m == n {
        let s: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        return Ok((s / m as f64).sqrt());
    }
    // Walk the merged breakpoints i/m and j/n with integer arithmetic:
    // t = k/(m n) for the common denominator.
    let (mu, nu) = (m as u128, n as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0u128;
    let mut total = 0.0;
    while i < m && j < n {
        let next_i = (i as u128 + 1) * nu;
        let next_j = (j as u128 + 1) * mu;
        let next = next_i.min(next_j);
        let d = x[i] - y[j];
        total += d * d * (next - t) as f64;
        t = next;
        if next_i == next {
            i += 1;
        }
        if next_j == next {
            j += 1;
        }
    }
    Ok((total / (mu * nu) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub size: usize,
    pub survival_fraction: f64,
    /// The strictly positive entries of the block.
    pub positives: EmpiricalMeasure,
}

/// Survival fraction and positive entries of each block of `x`.
pub fn block_statistics(x: &[f64], part: &BlockPartition) -> Result<Vec<BlockSummary>> {
    if part.n() != x.len() {
        return Err(Error::DimensionMismatch(format!("partition covers {} entries, vector has {}", part.n(), x.len())));
    }
    part.ranges()
        .into_iter()
        .map(|range| {
            let slice = &x[range];
            Ok(BlockSummary {
                size: slice.len(),
                survival_fraction: survival_fraction(slice, 0.0),
                positives: EmpiricalMeasure::new(slice.iter().copied().filter(|&v| v > 0.0).collect())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub bin_width: f64,
    pub rule: String,
}

impl Histogram {
    /// Counts normalized so the histogram integrates to 1.
    pub fn density(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / (total as f64 * self.bin_width)).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Freedman-Diaconis binning: width `2 IQR m^{−1/3}`.
pub fn freedman_diaconis(sample: &EmpiricalMeasure) -> Result<Histogram> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("histogram of an empty sample".into()));
    }
    let v = sample.values();
    let (lo, hi) = (v[0], v[v.len() - 1]);
    let iqr = sample.quantile(0.75) - sample.quantile(0.25);
    let mut width = 2.0 * iqr / (v.len() as f64).cbrt();
    if !(width > 0.0) {
        width = if hi > lo { (hi - lo) / 10.0 } else { 1.0 };
    }
    let bins = (((hi - lo) / width).ceil() as usize).clamp(1, 10_000);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { width };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &x in v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts, bin_width: width, rule: "freedman-diaconis".into() })
}
