use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fixed_point::GrowthLaw;
use crate::lcp::Solver;
use crate::lv_stats::BlockPartition;

/// Consecutive blocks of species with block-constant growth rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksConfig {
    pub fractions: Vec<f64>,
    pub values: Vec<f64>,
}

impl BlocksConfig {
    /// Blocks of sizes n/2, 3n/10, n/5 with growth rates 1, 3, 6.
    pub fn three_blocks() -> Self {
        Self { fractions: vec![0.5, 0.3, 0.2], values: vec![1.0, 3.0, 6.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub n: usize,
    pub kappa: f64,
    pub rho: f64,
    /// Growth-rate law; ignored when `blocks` is set. Defaults to `r ≡ 1`.
    pub growth: Option<GrowthLaw>,
    pub blocks: Option<BlocksConfig>,
    pub replications: usize,
    pub seed: Option<u64>,
    /// AMP depth `K`.
    pub depth: usize,
    pub output_dir: Option<PathBuf>,
    /// Values of `κ` for the survival-fraction sweep; one default grid per `ρ`
    /// when absent.
    pub kappa_grid: Option<Vec<f64>>,
    /// Values of `ρ` for the sweep and curve figures.
    pub rhos: Option<Vec<f64>>,
    /// Number of draws from the limit law used in Wasserstein comparisons.
    pub limit_samples: usize,
    pub solver: Solver,
    /// Secondary survival threshold reported next to the strict one.
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            n: 200,
            kappa: 2.0,
            rho: 0.0,
            growth: None,
            blocks: None,
            replications: 100,
            seed: None,
            depth: 5,
            output_dir: None,
            kappa_grid: None,
            rhos: None,
            limit_samples: 1_000_000,
            solver: Solver::Auto,
            eps: 1e-6,
        }
    }
}

pub const DEFAULT_RHOS: [f64; 3] = [-0.7, 0.0, 0.4];
pub const GRID_POINTS: usize = 25;
pub const GRID_MAX: f64 = 5.0;
pub const GRID_OFFSET: f64 = 0.05;

/// `GRID_POINTS` evenly spaced values from `√(2(1+ρ)) + 0.05` to 5.
pub fn default_kappa_grid(rho: f64) -> Vec<f64> {
    let lo = (2.0 * (1.0 + rho)).sqrt() + GRID_OFFSET;
    (0..GRID_POINTS)
        .map(|i| lo + (GRID_MAX - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad(format!("rho = {} is outside [-1, 1]", self.rho));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return bad(format!("kappa = {} must be positive", self.kappa));
        }
        if self.replications == 0 || self.depth == 0 || self.limit_samples == 0 {
            return bad("replications, depth and limit_samples must be at least 1".into());
        }
        if !(self.eps >= 0.0) {
            return bad(format!("eps = {} must be nonnegative", self.eps));
        }
        if let Some(grid) = &self.kappa_grid {
            if grid.is_empty() || grid.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
                return bad("kappa_grid must hold positive values".into());
            }
        }
        if let Some(rhos) = &self.rhos {
            if rhos.is_empty() || rhos.iter().any(|r| !(-1.0..=1.0).contains(r)) {
                return bad("rhos must lie in [-1, 1]".into());
            }
        }
        if let Some(b) = &self.blocks {
            if b.fractions.len() != b.values.len() {
                return bad("blocks need as many values as fractions".into());
            }
            BlockPartition::from_fractions(self.n, &b.fractions)?;
            self.block_laws()?;
        }
        self.growth_law()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.rhos.clone().unwrap_or_else(|| DEFAULT_RHOS.to_vec())
    }

    pub fn kappa_grid_for(&self, rho: f64) -> Vec<f64> {
        self.kappa_grid.clone().unwrap_or_else(|| default_kappa_grid(rho))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required".into()))
    }

    /// The partition of the `n` species: the configured blocks, or one
    /// block per atom of the growth law.
    pub fn partition(&self) -> Result<BlockPartition> {
        match &self.blocks {
            Some(b) => BlockPartition::from_fractions(self.n, &b.fractions),
            None => {
                let law = self.base_growth()?;
                let weights: Vec<f64> = law.atoms().iter().map(|a| a.1).collect();
                BlockPartition::from_fractions(self.n, &weights)
            }
        }
    }

    fn base_growth(&self) -> Result<GrowthLaw> {
        match &self.growth {
            Some(law) => {
                law.validate()?;
                Ok(law.clone())
            }
            None => GrowthLaw::constant(1.0),
        }
    }

    fn block_values(&self) -> Result<Vec<f64>> {
        match &self.blocks {
            Some(b) => Ok(b.values.clone()),
            None => Ok(self.base_growth()?.atoms().iter().map(|a| a.0).collect()),
        }
    }

    /// The growth-rate vector `r`, constant on each block.
    pub fn growth_vector(&self) -> Result<Vec<f64>> {
        self.partition()?.expand(&self.block_values()?)
    }

    /// The law of `r̄` matching `growth_vector`: block values weighted by the
    /// realized proportions `n_j/n`.
    pub fn growth_law(&self) -> Result<GrowthLaw> {
        let part = self.partition()?;
        let values = self.block_values()?;
        GrowthLaw::new(values.into_iter().zip(part.proportions()).collect())
    }

    /// One point-mass law per block.
    pub fn block_laws(&self) -> Result<Vec<GrowthLaw>> {
        self.block_values()?.into_iter().map(GrowthLaw::constant).collect()
    }
}
