//! Approximate message passing for Gaussian elliptic random matrices and the
//! equilibria of large random Lotka-Volterra systems.

pub mod amp;
pub mod cli;
pub mod density_evolution;
pub mod error;
pub mod experiments;
pub mod fixed_point;
pub mod lcp;
pub mod linalg;
pub mod lv_stats;
pub mod quadrature;
pub mod rand_matrix;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
