//! Time-varying vine copula models for multivariate financial risk.
//!
//! The crate covers the full pipeline from raw panel data to backtested
//! Value-at-Risk forecasts:
//!
//! - [`ingest`]: CSV panel loading, date alignment, log-difference risk
//!   indicators and descriptive diagnostics (Ljung-Box, ARCH-LM).
//! - [`marginals`]: ARFIMA(p,d,q)-GARCH(a,b) filtering with skewed
//!   Student-t innovations, order selection by AIC, and probability
//!   integral transforms in both directions.
//! - [`paircopula`]: bivariate copula primitives (Gaussian, Student-t,
//!   Gumbel, 180°-rotated Gumbel): log-density, h-functions and their
//!   inverses, finite-difference parameter scores, Kendall's tau.
//! - [`dynamics`]: score-driven (GAS) and Patton-style time-varying
//!   parameter recursions with per-pair maximum likelihood estimation.
//! - [`vine`]: R-/C-/D-vine structure selection, sequential fitting,
//!   R-vine matrix encoding and conditional-inverse simulation.
//! - [`risk`]: Monte Carlo VaR, Kupiec proportion-of-failures backtests
//!   and CSV/SVG report emission.
//! - [`synth`]: a seeded synthetic data generator with known dynamics,
//!   used by the end-to-end test suite and the `synth` CLI command.
//!
//! All randomized routines take explicit seeds and derive per-draw
//! substreams, so results are reproducible and independent of thread
//! scheduling.

pub mod dynamics;
pub mod error;
pub mod ingest;
pub mod marginals;
pub mod optim;
pub mod paircopula;
pub mod risk;
pub mod sstd;
pub mod stats;
pub mod synth;
pub mod vine;

pub use error::{Error, Result};
