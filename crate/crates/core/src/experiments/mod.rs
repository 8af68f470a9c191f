//! Configured experiments: AMP as a Lotka-Volterra solver and the Monte
//! Carlo figures.

pub mod amp_lv;
pub mod config;
pub mod figures;

pub use amp_lv::{run_amp_lv, AmpLvReport, AmpLvRow};
pub use config::{default_kappa_grid, BlocksConfig, ExperimentConfig};
pub use figures::{
    dist_experiment, exchangeability_experiment, prop_experiment, run_figure, truncdist_curves, write_amp_table,
    FigureName, FigureOutput,
};
