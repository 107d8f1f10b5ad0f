//! Step-process stochastic integrals against a finite-dimensional Brownian driver.

pub mod bdg;
pub mod driver;
pub mod integral;
pub mod process;

pub use bdg::{
    bdg_core_check, bdg_core_check_with, bdg_experiment, bdg_report, bdg_sweep, type2_embedding_check, BdgConfig,
    BdgReport, CoreRule, Estimate,
};
pub use driver::{BrownianDriver, DriverPath, Past};
pub use integral::{
    gamma_norm, gaussian_sum_norm, integrate, l2_gamma_norm, path_stats, GammaEstimate, PathStats, GAMMA_INNER,
};
pub use process::{uniform_partition, CoefficientFn, ProcessFamily, StepProcess};
