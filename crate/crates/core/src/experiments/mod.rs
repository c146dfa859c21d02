//! Simulation study: test profiles, point sources, Poisson images, the
//! log-profile error metric, method comparison and block bootstrap.

pub mod bootstrap;
pub mod compare;
pub mod metrics;
pub mod profiles;
pub mod simulate;
pub mod sources;

pub use bootstrap::{block_bootstrap_ci, block_resample, BootstrapBands, BootstrapConfig};
pub use compare::{run_comparison, ComparisonTable, Method, MethodSummary, ReplicateResult, ScenarioConfig};
pub use metrics::{floored_log, log_mse, DEFAULT_LOG_FLOOR};
pub use profiles::{custom_profile, load_custom_profile, make_test_profile, ProfileName};
pub use simulate::{expected_image, simulate_image};
pub use sources::{sample_point_sources, PointSource, PointSourceSet};
