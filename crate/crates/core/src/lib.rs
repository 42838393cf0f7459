//! Weighted U-statistic change-point tests.
//!
//! The test statistic is the maximum over admissible splits `k` of
//!
//! ```text
//! G(k) = 1 / (n^{3/2} (k/n (1 - k/n))^gamma) * sum_{i<=k} sum_{j>k} g(X_j - X_i)
//! ```
//!
//! for an odd kernel `g`. The CUSUM test (`g(x) = x`) and the Wilcoxon test
//! (`g(x) = 1{0 <= x} - 1/2`) are the built-in special cases. The weight
//! exponent `gamma in [0, 1/2)` boosts sensitivity to changes near the sample
//! boundary.
//!
//! Crate layout:
//!
//! - [`kernels`]: kernel functions, noise models and the Hoeffding
//!   decomposition quantities (`u(delta)`, projections, `sigma`, drift
//!   constants) that parameterize every limit law.
//! - [`statistic`]: fast and brute-force computation of the statistic profile
//!   `k -> G(k)` plus the test decision.
//! - [`limits`]: Monte Carlo samplers of the weighted Brownian-bridge limit
//!   distributions (null, fixed-fraction local alternatives, early-change
//!   alternatives) and critical-value tables.
//! - [`experiments`]: data generation under step alternatives, size-corrected
//!   power curves, envelope power and overall-power summaries.
//! - [`rng`]: counter-addressed random streams so that replication-parallel
//!   experiments are reproducible for any worker count.

pub mod error;
pub mod experiments;
pub mod kernels;
pub mod limits;
pub mod rng;
pub mod statistic;

pub use error::Error;
pub use kernels::{Estimate, Kernel, KernelKind, NoiseModel};
pub use statistic::{Sidedness, StatisticProfile, TestOutcome, TimeSeries, WeightGamma};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
