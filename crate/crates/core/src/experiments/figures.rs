//! Monte Carlo experiments behind the survival-fraction, distribution and
//! blockwise figures, and their CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BlocksConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::fixed_point::{solve_system, GrowthLaw, SystemSolution};
use crate::lcp::{equilibrium_with_norms, EquilibriumResult, MatrixNorms};
use crate::lv_stats::{
    block_statistics, f_surv_block, f_surv_density, f_surv_mixture, f_surv_sample, freedman_diaconis,
    survival_fraction, wasserstein2_1d, EmpiricalMeasure, Histogram, LimitLaw,
};
use crate::rand_matrix::sample_normalized_elliptic;
use crate::rng::derive_seed;

/// Seed namespace for draws from limit laws, kept apart from matrix seeds.
const LIMIT_NAMESPACE: u64 = 1 << 40;
const CURVE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Prop,
    Dist,
    Truncdist,
    Exchangeability,
}

impl FigureName {
    pub fn as_str(&self) -> &'static str {
        match self {
            FigureName::Prop => "prop",
            FigureName::Dist => "dist",
            FigureName::Truncdist => "truncdist",
            FigureName::Exchangeability => "exchangeability",
        }
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop" => Ok(FigureName::Prop),
            "dist" => Ok(FigureName::Dist),
            "truncdist" => Ok(FigureName::Truncdist),
            "exchangeability" => Ok(FigureName::Exchangeability),
            other => Err(Error::Config(format!(
                "unknown figure '{other}' (expected prop, dist, truncdist or exchangeability)"
            ))),
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// One equilibrium per replication seed, in seed order.
fn simulate(cfg: &ExperimentConfig, rho: f64, kappas: &[f64], seeds: &[u64]) -> Result<Vec<Vec<EquilibriumResult>>> {
    let r = cfg.growth_vector()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let a = sample_normalized_elliptic(cfg.n, rho, seed)?;
            let norms = MatrixNorms::of(&a)?;
            kappas.iter().map(|&k| equilibrium_with_norms(&a, &norms, k, &r, cfg.solver)).collect()
        })
        .collect()
}

fn replication_seeds(master: u64, stream: u64, count: usize) -> Vec<u64> {
    let base = derive_seed(master, stream);
    (0..count as u64).map(|i| derive_seed(base, i)).collect()
}

fn limit_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, LIMIT_NAMESPACE + index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropRow {
    pub kappa: f64,
    pub rho: f64,
    pub gamma_theory: f64,
    pub gamma_mc_mean: f64,
    pub gamma_mc_se: f64,
    /// Mean survival fraction with threshold `eps` instead of 0.
    pub gamma_mc_mean_eps: f64,
    pub gate_pass_rate: f64,
    /// Largest KKT residual over replications that passed the gate.
    pub max_kkt_residual: f64,
}

/// Mean survival fraction over replications against `γ(κ, ρ)` on a grid of
/// `κ` for each `ρ`. The same matrices are reused across the `κ` grid.
pub fn prop_experiment(cfg: &ExperimentConfig) -> Result<Vec<PropRow>> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let law = cfg.growth_law()?;
    let mut rows = Vec::new();
    for (ri, rho) in cfg.rhos().into_iter().enumerate() {
        let kappas = cfg.kappa_grid_for(rho);
        let theory: Vec<SystemSolution> = kappas.iter().map(|&k| solve_system(k, rho, &law)).collect::<Result<_>>()?;
        let seeds = replication_seeds(master, ri as u64, cfg.replications);
        let results = simulate(cfg, rho, &kappas, &seeds)?;
        for (ki, (&kappa, sol)) in kappas.iter().zip(&theory).enumerate() {
            let fractions: Vec<f64> = results.iter().map(|rep| survival_fraction(&rep[ki].x_star, 0.0)).collect();
            let fractions_eps: Vec<f64> =
                results.iter().map(|rep| survival_fraction(&rep[ki].x_star, cfg.eps)).collect();
            let (mean, se) = mean_and_se(&fractions);
            rows.push(PropRow {
                kappa,
                rho,
                gamma_theory: sol.gamma,
                gamma_mc_mean: mean,
                gamma_mc_se: se,
                gamma_mc_mean_eps: mean_and_se(&fractions_eps).0,
                gate_pass_rate: results.iter().filter(|rep| rep[ki].gate_passed).count() as f64 / results.len() as f64,
                max_kkt_residual: results
                    .iter()
                    .filter(|rep| rep[ki].gate_passed)
                    .map(|rep| rep[ki].residuals.max())
                    .fold(0.0, f64::max),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistReport {
    pub solution: SystemSolution,
    /// `W₂` between the pooled positive abundances and draws from `f_surv`.
    pub w2: f64,
    pub pooled_count: usize,
    pub gate_pass_rate: f64,
    pub survival_mean: f64,
    pub histogram: Histogram,
    /// `f_surv` at the histogram bin centres.
    pub f_surv_at_centers: Vec<f64>,
    pub curve: Vec<(f64, f64)>,
}

fn curve_grid(limits: &[LimitLaw]) -> Vec<f64> {
    let top = limits
        .iter()
        .map(|l| {
            let r_max = l.law.atoms().iter().map(|a| a.0).fold(0.0, f64::max);
            l.scale() * (r_max + 6.0 * l.sigma)
        })
        .fold(0.0, f64::max);
    (1..=CURVE_POINTS).map(|i| top * i as f64 / CURVE_POINTS as f64).collect()
}

/// Pooled positive equilibrium abundances against `f_surv` at `(κ, ρ)`.
pub fn dist_experiment(cfg: &ExperimentConfig) -> Result<DistReport> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let law = cfg.growth_law()?;
    let sol = solve_system(cfg.kappa, cfg.rho, &law)?;
    let limit = LimitLaw::new(&sol, &law);
    let seeds = replication_seeds(master, 0, cfg.replications);
    let results = simulate(cfg, cfg.rho, &[cfg.kappa], &seeds)?;

    let pooled: Vec<f64> = results.iter().flat_map(|rep| rep[0].x_star.iter().copied().filter(|&v| v > 0.0)).collect();
    let pooled = EmpiricalMeasure::new(pooled)?;
    if pooled.is_empty() {
        return Err(Error::NoSolution("no positive abundances in any replication".into()));
    }
    let reference = EmpiricalMeasure::new(f_surv_sample(&limit, cfg.limit_samples, limit_seed(master, 0)))?;
    let histogram = freedman_diaconis(&pooled)?;
    let f_surv_at_centers = histogram.centers().iter().map(|&y| f_surv_density(&limit, y)).collect();
    let curve = curve_grid(std::slice::from_ref(&limit)).into_iter().map(|y| (y, f_surv_density(&limit, y))).collect();
    let fractions: Vec<f64> = results.iter().map(|rep| survival_fraction(&rep[0].x_star, 0.0)).collect();

    Ok(DistReport {
        w2: wasserstein2_1d(&pooled, &reference)?,
        pooled_count: pooled.len(),
        gate_pass_rate: results.iter().filter(|rep| rep[0].gate_passed).count() as f64 / results.len() as f64,
        survival_mean: mean_and_se(&fractions).0,
        solution: sol,
        histogram,
        f_surv_at_centers,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncCurve {
    pub solution: SystemSolution,
    pub points: Vec<(f64, f64)>,
}

/// `f_surv` at fixed `κ` for each `ρ`, on a common grid.
pub fn truncdist_curves(cfg: &ExperimentConfig) -> Result<Vec<TruncCurve>> {
    cfg.validate()?;
    let law = cfg.growth_law()?;
    let limits: Vec<LimitLaw> = cfg
        .rhos()
        .into_iter()
        .map(|rho| Ok(LimitLaw::new(&solve_system(cfg.kappa, rho, &law)?, &law)))
        .collect::<Result<_>>()?;
    let grid = curve_grid(&limits);
    cfg.rhos()
        .into_iter()
        .zip(&limits)
        .map(|(rho, limit)| {
            Ok(TruncCurve {
                solution: solve_system(cfg.kappa, rho, &law)?,
                points: grid.iter().map(|&y| (y, f_surv_density(limit, y))).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub size: usize,
    pub r: f64,
    pub gamma_theory: f64,
    pub survival_mean: f64,
    pub survival_se: f64,
    /// `W₂` between pooled positive abundances of the block and draws from
    /// `f^j_surv`.
    pub w2: f64,
    pub pooled_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeabilityReport {
    pub solution: SystemSolution,
    pub blocks: Vec<BlockRow>,
    /// `Σ_j c_j γ_j / γ`.
    pub mixture_weight_sum: f64,
    pub histograms: Vec<(Histogram, Vec<f64>)>,
    /// Rows of `(y, f¹_surv, …, f^q_surv, mixture, f_surv)`.
    pub curves: Vec<Vec<f64>>,
}

/// Blockwise survival fractions and abundance laws.
pub fn exchangeability_experiment(cfg: &ExperimentConfig) -> Result<ExchangeabilityReport> {
    let cfg = if cfg.blocks.is_some() {
        cfg.clone()
    } else {
        ExperimentConfig { blocks: Some(BlocksConfig::three_blocks()), ..cfg.clone() }
    };
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let law = cfg.growth_law()?;
    let part = cfg.partition()?;
    let block_laws = cfg.block_laws()?;
    let sol = solve_system(cfg.kappa, cfg.rho, &law)?;
    let limit = LimitLaw::new(&sol, &law);

    let seeds = replication_seeds(master, 0, cfg.replications);
    let results = simulate(&cfg, cfg.rho, &[cfg.kappa], &seeds)?;
    let stats: Vec<_> = results.iter().map(|rep| block_statistics(&rep[0].x_star, &part)).collect::<Result<_>>()?;

    let mut blocks = Vec::new();
    let mut histograms = Vec::new();
    for (j, block_law) in block_laws.iter().enumerate() {
        let fractions: Vec<f64> = stats.iter().map(|s| s[j].survival_fraction).collect();
        let (mean, se) = mean_and_se(&fractions);
        let pooled = EmpiricalMeasure::new(stats.iter().flat_map(|s| s[j].positives.values().iter().copied()).collect())?;
        let block_limit = limit.block(block_law);
        let reference = EmpiricalMeasure::new(f_surv_sample(&block_limit, cfg.limit_samples, limit_seed(master, j as u64)))?;
        let w2 = if pooled.is_empty() { f64::NAN } else { wasserstein2_1d(&pooled, &reference)? };
        if !pooled.is_empty() {
            let h = freedman_diaconis(&pooled)?;
            let f: Vec<f64> = h.centers().iter().map(|&y| f_surv_density(&block_limit, y)).collect();
            histograms.push((h, f));
        }
        blocks.push(BlockRow {
            block: j + 1,
            size: part.sizes()[j],
            r: block_law.atoms()[0].0,
            gamma_theory: block_limit.gamma(),
            survival_mean: mean,
            survival_se: se,
            w2,
            pooled_count: pooled.len(),
        });
    }

    let weighted: Vec<(f64, GrowthLaw)> = part.proportions().into_iter().zip(block_laws.iter().cloned()).collect();
    let limits: Vec<LimitLaw> = block_laws.iter().map(|l| limit.block(l)).collect();
    let curves = curve_grid(&limits)
        .into_iter()
        .map(|y| {
            let mut row = vec![y];
            row.extend(block_laws.iter().map(|l| f_surv_block(&limit, l, y)));
            row.push(f_surv_mixture(&limit, &weighted, y).0);
            row.push(f_surv_density(&limit, y));
            row
        })
        .collect();
    let mixture_weight_sum = f_surv_mixture(&limit, &weighted, 1.0).1.iter().sum();

    Ok(ExchangeabilityReport { solution: sol, blocks, mixture_weight_sum, histograms, curves })
}

/// Metadata written as the first line of every CSV file.
fn metadata_line(cfg: &ExperimentConfig, figure: &str, extra: &[(&str, String)]) -> String {
    let mut line = format!(
        "# figure={figure}; config_sha256={}; seed={}; version={} {}",
        cfg.hash(),
        cfg.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
    );
    for (k, v) in extra {
        let _ = write!(line, "; {k}={v}");
    }
    line.push('\n');
    line
}

fn write_csv(path: &Path, meta: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::from(meta);
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn fmt_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

fn histogram_rows(h: &Histogram, theory: &[f64], prefix: &[f64]) -> Vec<Vec<String>> {
    let density = h.density();
    (0..h.counts.len())
        .map(|i| {
            let mut row = fmt_row(prefix);
            row.extend(fmt_row(&[h.edges[i], h.edges[i + 1], 0.5 * (h.edges[i] + h.edges[i + 1])]));
            row.push(h.counts[i].to_string());
            row.extend(fmt_row(&[density[i], theory[i]]));
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Runs one figure experiment and writes its CSV files into `out_dir`.
pub fn run_figure(name: FigureName, cfg: &ExperimentConfig, out_dir: &Path) -> Result<FigureOutput> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let fig = name.as_str();
    let mut files = Vec::new();
    let summary;
    match name {
        FigureName::Prop => {
            let rows = prop_experiment(cfg)?;
            let grid_note = match &cfg.kappa_grid {
                Some(g) => format!("{g:?}"),
                None => "linspace(sqrt(2(1+rho))+0.05, 5, 25)".into(),
            };
            let meta = metadata_line(cfg, fig, &[("kappa_grid", grid_note), ("replications", cfg.replications.to_string())]);
            let path = out_dir.join("prop.csv");
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    fmt_row(&[
                        r.kappa,
                        r.rho,
                        r.gamma_theory,
                        r.gamma_mc_mean,
                        r.gamma_mc_se,
                        r.gamma_mc_mean_eps,
                        r.gate_pass_rate,
                        r.max_kkt_residual,
                    ])
                })
                .collect();
            write_csv(
                &path,
                &meta,
                &[
                    "kappa",
                    "rho",
                    "gamma_theory",
                    "gamma_mc_mean",
                    "gamma_mc_se",
                    "gamma_mc_mean_eps",
                    "gate_pass_rate",
                    "max_kkt_residual",
                ],
                &body,
            )?;
            files.push(path);
            summary = serde_json::to_value(&rows)?;
        }
        FigureName::Dist => {
            let rep = dist_experiment(cfg)?;
            let meta = metadata_line(
                cfg,
                fig,
                &[("binning", rep.histogram.rule.clone()), ("w2", rep.w2.to_string())],
            );
            let path = out_dir.join("dist.csv");
            write_csv(
                &path,
                &meta,
                &["bin_left", "bin_right", "bin_center", "count", "density_mc", "f_surv"],
                &histogram_rows(&rep.histogram, &rep.f_surv_at_centers, &[]),
            )?;
            files.push(path);
            let path = out_dir.join("dist_curve.csv");
            let body: Vec<Vec<String>> = rep.curve.iter().map(|&(y, f)| fmt_row(&[y, f])).collect();
            write_csv(&path, &meta, &["y", "f_surv"], &body)?;
            files.push(path);
            summary = serde_json::json!({
                "solution": rep.solution,
                "w2": rep.w2,
                "pooled_count": rep.pooled_count,
                "gate_pass_rate": rep.gate_pass_rate,
                "survival_mean": rep.survival_mean,
            });
        }
        FigureName::Truncdist => {
            let curves = truncdist_curves(cfg)?;
            let meta = metadata_line(cfg, fig, &[("kappa", cfg.kappa.to_string())]);
            let path = out_dir.join("truncdist.csv");
            let body: Vec<Vec<String>> = curves
                .iter()
                .flat_map(|c| c.points.iter().map(move |&(y, f)| fmt_row(&[c.solution.rho, y, f])))
                .collect();
            write_csv(&path, &meta, &["rho", "y", "f_surv"], &body)?;
            files.push(path);
            summary = serde_json::to_value(curves.iter().map(|c| &c.solution).collect::<Vec<_>>())?;
        }
        FigureName::Exchangeability => {
            let rep = exchangeability_experiment(cfg)?;
            let meta = metadata_line(
                cfg,
                fig,
                &[("binning", "freedman-diaconis".into()), ("mixture_weight_sum", rep.mixture_weight_sum.to_string())],
            );
            let path = out_dir.join("exchangeability_blocks.csv");
            let body: Vec<Vec<String>> = rep
                .blocks
                .iter()
                .map(|b| {
                    let mut row = vec![b.block.to_string(), b.size.to_string()];
                    row.extend(fmt_row(&[b.r, b.gamma_theory, b.survival_mean, b.survival_se, b.w2]));
                    row.push(b.pooled_count.to_string());
                    row
                })
                .collect();
            write_csv(
                &path,
                &meta,
                &["block", "size", "r", "gamma_theory", "survival_mean", "survival_se", "w2", "pooled_count"],
                &body,
            )?;
            files.push(path);

            let path = out_dir.join("exchangeability_hist.csv");
            let body: Vec<Vec<String>> = rep
                .histograms
                .iter()
                .enumerate()
                .flat_map(|(j, (h, f))| histogram_rows(h, f, &[(j + 1) as f64]))
                .collect();
            write_csv(
                &path,
                &meta,
                &["block", "bin_left", "bin_right", "bin_center", "count", "density_mc", "f_surv_block"],
                &body,
            )?;
            files.push(path);

            let path = out_dir.join("exchangeability_curves.csv");
            let q = rep.blocks.len();
            let mut header: Vec<String> = vec!["y".into()];
            header.extend((1..=q).map(|j| format!("f_surv_block{j}")));
            header.push("mixture".into());
            header.push("f_surv".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let body: Vec<Vec<String>> = rep.curves.iter().map(|r| fmt_row(r)).collect();
            write_csv(&path, &meta, &header, &body)?;
            files.push(path);
            summary = serde_json::json!({
                "solution": rep.solution,
                "blocks": rep.blocks,
                "mixture_weight_sum": rep.mixture_weight_sum,
            });
        }
    }
    Ok(FigureOutput { files, summary })
}

/// Writes the AMP-for-LV table as CSV.
pub fn write_amp_table(report: &super::amp_lv::AmpLvReport, cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let meta = metadata_line(
        cfg,
        "amp-run",
        &[
            ("delta", report.solution.delta.to_string()),
            ("sigma", report.solution.sigma.to_string()),
            ("gamma", report.solution.gamma.to_string()),
        ],
    );
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string()];
            row.extend(fmt_row(&[r.var_u, r.theta_sq, r.rel_err, r.survival_proxy, r.gamma_k, r.onsager, r.sigma_k, r.w2]));
            row
        })
        .collect();
    write_csv(
        path,
        &meta,
        &["k", "var_u", "theta_sq", "rel_err", "survival_proxy", "gamma_k", "onsager", "sigma_k", "w2"],
        &body,
    )
}
