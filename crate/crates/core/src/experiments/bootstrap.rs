use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{floored_log, DEFAULT_LOG_FLOOR};
use crate::error::{Error, Result};
use crate::model::{Coefficients, ForwardModel, PixelImage};
use crate::qut::ZeroThresholdFn;
use crate::rng::{domain, stream};
use crate::solver::{fit_fista, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Lower and upper quantile levels of the band.
    pub levels: [f64; 2],
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 100, levels: [0.025, 0.975], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBands {
    pub radius: Vec<f64>,
    /// Log-profile bands and the log of the point estimate.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub estimate: Vec<f64>,
    pub replicates: usize,
    /// Refits that failed and were left out of the quantiles.
    pub failed: usize,
    /// Largest relative objective rise over the refits.
    pub max_trace_rise: f64,
    /// Converged refits outside the KKT tolerance.
    pub kkt_failures: usize,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidParameter("replicates: bootstrap needs at least two".into()));
        }
        let [ql, qh] = self.levels;
        if !(0.0..=1.0).contains(&ql) || !(ql..=1.0).contains(&qh) {
            return Err(Error::InvalidParameter(format!("levels {:?} must satisfy 0 <= lo <= hi <= 1", self.levels)));
        }
        Ok(())
    }
}

impl BootstrapBands {
    pub fn width(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| h - l).collect()
    }

    /// Fraction of radii in `range` whose band holds `values`.
    pub fn coverage(&self, values: &[f64], range: std::ops::Range<usize>) -> f64 {
        let hits = range.clone().filter(|&i| values[i] >= self.lo[i] && values[i] <= self.hi[i]).count();
        hits as f64 / range.len() as f64
    }
}

/// Redraws every disjoint 2x2 block's four values with replacement from
/// that block.
pub fn block_resample<R: Rng + ?Sized>(values: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n % 2 != 0 {
        return Err(Error::InvalidDimension(format!("block bootstrap needs an even side, got {n}")));
    }
    let mut out = vec![0.0; n * n];
    for by in (0..n).step_by(2) {
        for bx in (0..n).step_by(2) {
            let cell = [by * n + bx, by * n + bx + 1, (by + 1) * n + bx, (by + 1) * n + bx + 1];
            for p in cell {
                out[p] = values[cell[rng.random_range(0..4)]];
            }
        }
    }
    Ok(out)
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// Pointwise bands of the log-profile (mean of both halves, divided by
/// `exposure`) from block-bootstrap refits at fixed penalties.
pub fn block_bootstrap_ci(
    y: &PixelImage,
    model: &ForwardModel,
    point: &Coefficients,
    lambda1: f64,
    lambda2: f64,
    opts: &FitOptions,
    cfg: &BootstrapConfig,
    exposure: f64,
) -> Result<BootstrapBands> {
    let n = y.n();
    if n % 2 != 0 {
        return Err(Error::InvalidDimension(format!("block bootstrap needs an even side, got {n}")));
    }
    cfg.validate()?;
    let [ql, qh] = cfg.levels;
    let to_log = |c: &Coefficients| -> Result<Vec<f64>> {
        let prof = model.profile_of(c)?.mean();
        Ok(floored_log(&prof.iter().map(|v| v / exposure).collect::<Vec<_>>(), DEFAULT_LOG_FLOOR))
    };
    let estimate = to_log(point)?;
    let ztf = ZeroThresholdFn::new(model)?;
    let mu_point = model.mu(point)?;

    let draws: Vec<Option<(Vec<f64>, f64, bool)>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| -> Result<Option<(Vec<f64>, f64, bool)>> {
            let mut rng = stream(cfg.seed, domain::BOOTSTRAP, b);
            let yb = block_resample(y.values(), n, &mut rng)?;
            // warm start from the point fit when it is feasible for yb
            let warm = yb.iter().zip(&mu_point).all(|(yi, mi)| *yi <= 0.0 || *mi > opts.mu_floor);
            let init = if warm {
                point.clone()
            } else {
                let mut c = model.zero_coefficients();
                match ztf.alpha0(&yb) {
                    Ok(a) => c.set_alpha0(a),
                    Err(Error::NotInDomain) => return Ok(None),
                    Err(e) => return Err(e),
                }
                c
            };
            match fit_fista(&yb, model, lambda1, lambda2, opts, &init) {
                Ok(fit) => {
                    let kkt_failed = fit.converged && !fit.kkt_satisfied();
                    Ok(Some((to_log(&fit.coefficients)?, fit.max_trace_rise(), kkt_failed)))
                }
                Err(e) if e.is_numerical() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let done: Vec<(Vec<f64>, f64, bool)> = draws.into_iter().flatten().collect();
    let max_trace_rise = done.iter().map(|d| d.1).fold(0.0, f64::max);
    let kkt_failures = done.iter().filter(|d| d.2).count();
    let good: Vec<Vec<f64>> = done.into_iter().map(|d| d.0).collect();
    let failed = cfg.replicates - good.len();
    if good.len() < 2 {
        return Err(Error::Scenario { failed, total: cfg.replicates });
    }
    let len = estimate.len();
    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    let mut col = vec![0.0; good.len()];
    for i in 0..len {
        for (c, g) in col.iter_mut().zip(&good) {
            *c = g[i];
        }
        col.sort_by(f64::total_cmp);
        lo.push(quantile(&col, ql));
        hi.push(quantile(&col, qh));
    }
    Ok(BootstrapBands {
        radius: model.grid().shell_mids(),
        lo,
        hi,
        estimate,
        replicates: cfg.replicates,
        failed,
        max_trace_rise,
        kkt_failures,
    })
}
