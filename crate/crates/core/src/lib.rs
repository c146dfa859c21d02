//! Deprojection of spherically symmetric X-ray emission from a single
//! Poisson-count image.
//!
//! The emissivity profile is expanded on King atoms and periodic wavelets,
//! point sources are a sparse non-negative image, and both are estimated
//! jointly by an L1-penalized Poisson likelihood with identity link. The two
//! penalty levels come from quantiles of the zero-thresholding statistic
//! under the no-emission null model. An onion-peeling baseline and a
//! simulation harness are included for benchmarking.

pub mod basis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod onion;
pub mod qut;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
