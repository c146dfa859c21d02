use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{log_mse, DEFAULT_LOG_FLOOR};
use super::profiles::{load_custom_profile, make_test_profile, ProfileName};
use super::simulate::simulate_image;
use super::sources::{sample_point_sources, PointSourceSet};
use crate::basis::DictionaryConfig;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{DoubledProfile, ForwardModel, PixelImage, RadialGrid};
use crate::onion::{onion_baseline, VolumeGeometry};
use crate::qut::{qut_lasso, QutConfig};
use crate::rng::{derive_seed, domain, stream};
use crate::solver::FitOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub profile: ProfileName,
    /// `radius,value` CSV for the custom profile.
    pub profile_file: Option<PathBuf>,
    /// Peak emissivity; per-profile default when absent.
    pub peak: Option<f64>,
    pub with_sources: bool,
    /// Number of point sources; `n / 4` when absent.
    pub source_count: Option<usize>,
    pub amplitude_range: [f64; 2],
    pub exposure: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Radius of the oracle source masks handed to the onion method.
    pub mask_radius: f64,
    pub onion_geometry: VolumeGeometry,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 128,
            profile: ProfileName::CosmoBlocks,
            profile_file: None,
            peak: None,
            with_sources: false,
            source_count: None,
            amplitude_range: [0.0, 0.002],
            exposure: 1.0,
            replicates: 24,
            seed: 0,
            mask_radius: 2.0,
            onion_geometry: VolumeGeometry::Analytic,
        }
    }
}

impl ScenarioConfig {
    pub fn source_count(&self) -> usize {
        if self.with_sources {
            self.source_count.unwrap_or(self.n / 4)
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() || self.n < 8 {
            return Err(Error::InvalidParameter(format!("scenario n = {} must be a power of two >= 8", self.n)));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(Error::InvalidParameter(format!("exposure {} must be > 0", self.exposure)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        let [lo, hi] = self.amplitude_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidParameter(format!("amplitude range [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
        }
        if self.profile == ProfileName::Custom && self.profile_file.is_none() {
            return Err(Error::InvalidParameter("custom profile needs profile_file".into()));
        }
        Ok(())
    }

    /// True profile on the grid.
    pub fn truth(&self, grid: &RadialGrid) -> Result<DoubledProfile> {
        match self.profile {
            ProfileName::Custom => {
                let path = self.profile_file.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("custom profile needs profile_file".into())
                })?;
                load_custom_profile(path, grid)
            }
            name => make_test_profile(name, grid, self.peak.unwrap_or_else(|| name.default_peak())),
        }
    }

    pub fn sources(&self, replicate: u64) -> Result<PointSourceSet> {
        let count = self.source_count();
        if count == 0 {
            return Ok(PointSourceSet::empty(self.n));
        }
        sample_point_sources(self.n, count, self.amplitude_range, &mut stream(self.seed, domain::SOURCES, replicate))
    }

    /// Replicate `k`: sources and the Poisson image drawn from them.
    pub fn simulate(
        &self,
        model: &ForwardModel,
        truth: &DoubledProfile,
        replicate: u64,
    ) -> Result<(PointSourceSet, PixelImage)> {
        let sources = self.sources(replicate)?;
        let mut rng = stream(self.seed, domain::SIMULATE, replicate);
        let y = simulate_image(model, truth, &sources, self.exposure, &mut rng)?;
        Ok((sources, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QutLasso,
    Onion,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::QutLasso => "qut_lasso",
            Self::Onion => "onion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub method: Method,
    pub log_mse: Option<f64>,
    pub error: Option<String>,
    /// Radial estimate (mean of both halves) at shell midpoints.
    pub profile: Vec<f64>,
    /// Solver diagnostics; zero for the onion method.
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative objective rise along the fit; zero for the onion.
    pub trace_rise: f64,
    /// KKT residuals within tolerance (always true for the onion).
    pub kkt_ok: bool,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub std_error: f64,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub profile: ProfileName,
    pub n: usize,
    pub with_sources: bool,
    pub radius: Vec<f64>,
    pub truth: Vec<f64>,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<MethodSummary>,
}

impl ComparisonTable {
    pub fn summary_for(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }
}

fn failed(replicate: usize, method: Method, e: Error) -> ReplicateResult {
    ReplicateResult {
        replicate,
        method,
        log_mse: None,
        error: Some(e.to_string()),
        profile: Vec::new(),
        iterations: 0,
        converged: false,
        trace_rise: 0.0,
        kkt_ok: true,
        lambda1: f64::NAN,
        lambda2: f64::NAN,
    }
}

/// Simulates `replicates` images and scores both estimators on each.
pub fn run_comparison(
    scenario: &ScenarioConfig,
    model_cfg: &ModelConfig,
    dict: &DictionaryConfig,
    opts: &FitOptions,
    qut_cfg: &QutConfig,
) -> Result<ComparisonTable> {
    scenario.validate()?;
    qut_cfg.validate(scenario.n)?;
    opts.validate()?;
    let model = model_cfg.build(scenario.n, dict, 1.0)?;
    let fit_model = model_cfg.build(scenario.n, dict, scenario.exposure)?;
    let grid = *model.grid();
    let truth_profile = scenario.truth(&grid)?;
    let truth = truth_profile.mean();
    let exposure = scenario.exposure;

    let per_rep: Vec<Result<[ReplicateResult; 2]>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|k| {
            let (sources, y) = scenario.simulate(&model, &truth_profile, k as u64)?;

            let cfg = QutConfig { seed: derive_seed(scenario.seed ^ qut_cfg.seed, domain::QUT_NULL, k as u64), ..qut_cfg.clone() };
            let lasso = match qut_lasso(y.values(), &fit_model, &cfg, opts).and_then(|r| {
                let prof = fit_model.profile_of(&r.fit.coefficients)?;
                let est: Vec<f64> = prof.mean().iter().map(|v| v / exposure).collect();
                Ok((r, est))
            }) {
                Ok((r, est)) => ReplicateResult {
                    replicate: k,
                    method: Method::QutLasso,
                    log_mse: Some(log_mse(&est, &truth, DEFAULT_LOG_FLOOR)?),
                    error: None,
                    profile: est,
                    iterations: r.fit.iterations,
                    converged: r.fit.converged,
                    trace_rise: r.fit.max_trace_rise(),
                    kkt_ok: !r.fit.converged || r.fit.kkt_satisfied(),
                    lambda1: r.qut.lambda1,
                    lambda2: r.qut.lambda2,
                },
                Err(e) if e.is_numerical() || matches!(e, Error::NotInDomain | Error::Domain(_)) => {
                    failed(k, Method::QutLasso, e)
                }
                Err(e) => return Err(e),
            };

            let mask = scenario.with_sources.then(|| sources.mask(scenario.mask_radius));
            let onion = match onion_baseline(
                &y,
                fit_model.sensitivity(),
                fit_model.background(),
                mask.as_deref(),
                &grid,
                scenario.onion_geometry,
            ) {
                Ok((_, est)) => {
                    let est: Vec<f64> = est.emissivity.iter().map(|v| v / exposure).collect();
                    ReplicateResult {
                        replicate: k,
                        method: Method::Onion,
                        log_mse: Some(log_mse(&est, &truth, DEFAULT_LOG_FLOOR)?),
                        error: None,
                        profile: est,
                        iterations: 0,
                        converged: true,
                        trace_rise: 0.0,
                        kkt_ok: true,
                        lambda1: f64::NAN,
                        lambda2: f64::NAN,
                    }
                }
                Err(e) if e.is_numerical() || matches!(e, Error::Domain(_)) => failed(k, Method::Onion, e),
                Err(e) => return Err(e),
            };
            Ok([lasso, onion])
        })
        .collect();

    let mut replicates = Vec::with_capacity(2 * scenario.replicates);
    for r in per_rep {
        replicates.extend(r?);
    }
    let mut summary = Vec::new();
    for method in [Method::QutLasso, Method::Onion] {
        let vals: Vec<f64> = replicates.iter().filter(|r| r.method == method).filter_map(|r| r.log_mse).collect();
        let failed = scenario.replicates - vals.len();
        if failed * 4 > scenario.replicates {
            return Err(Error::Scenario { failed, total: scenario.replicates });
        }
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
        summary.push(MethodSummary { method, mean, std_error: (var / k).sqrt(), succeeded: vals.len(), failed });
    }
    Ok(ComparisonTable {
        profile: scenario.profile,
        n: scenario.n,
        with_sources: scenario.with_sources,
        radius: grid.shell_mids(),
        truth,
        replicates,
        summary,
    })
}
