//! Vernier-averaged fitting of two-pole excitation models to QPE histograms.

pub mod cost;
pub mod kernel;
pub mod landscape;
pub mod optimize;

pub use cost::{l1_distance, trial_distribution, CostFunction, Discrepancy, TrialParams};
pub use kernel::qpe_kernel;
pub use landscape::{landscape_scan, count_strict_minima, Landscape, Param, Plane};
pub use optimize::{canonicalize, nelder_mead, optimize, FitResult, NelderMead, OptimizerConfig};
