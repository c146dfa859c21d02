//! Zero-thresholding function and quantile universal thresholds.
//!
//! For an image `y` the zero-thresholding function gives the smallest pair
//! `(lambda1, lambda2)` at which the penalized fit keeps every dictionary
//! weight and every point source at zero, leaving only the intercept. Its
//! distribution under the no-emission null model, estimated by Monte Carlo,
//! yields the thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::image::check_len;
use crate::model::{dyadic_size, ForwardModel};
use crate::rng::{domain, poisson_image, stream};
use crate::solver::{fit_fista, FitOptions, FitResult};

/// Root of `x0^T 1 = x0^T (y / (e + x0 a))` on the half-line where the
/// intensity stays positive. `Err(NotInDomain)` when no root exists.
pub fn solve_alpha0_null(y: &[f64], e: &[f64], x0: &[f64]) -> Result<f64> {
    check_len("background", e.len(), y.len())?;
    check_len("intercept image", x0.len(), y.len())?;
    if x0.iter().any(|v| *v < 0.0) || !x0.iter().any(|v| *v > 0.0) {
        return Err(Error::Domain("intercept image must be >= 0 with a positive entry".into()));
    }
    // Pixels the intercept cannot reach keep mu = e.
    if y.iter().zip(x0).zip(e).any(|((yi, xi), ei)| *yi > 0.0 && *xi == 0.0 && *ei <= 0.0) {
        return Err(Error::NotInDomain);
    }
    let sum_x0: f64 = x0.iter().sum();
    if !y.iter().zip(x0).any(|(yi, xi)| *yi > 0.0 && *xi > 0.0) {
        return Err(Error::NotInDomain);
    }
    let lower = x0
        .iter()
        .zip(e)
        .filter(|(xi, _)| **xi > 0.0)
        .map(|(xi, ei)| -ei / xi)
        .fold(f64::NEG_INFINITY, f64::max);
    let g = |a: f64| -> f64 {
        let mut acc = sum_x0;
        for ((yi, xi), ei) in y.iter().zip(x0).zip(e) {
            if *yi > 0.0 && *xi > 0.0 {
                acc -= xi * yi / (ei + xi * a);
            }
        }
        acc
    };
    // Bracket in the offset d = a - lower > 0.
    let scale = y.iter().sum::<f64>() / sum_x0 + lower.abs();
    let mut hi = scale.max(f64::MIN_POSITIVE);
    let mut guard = 0;
    while g(lower + hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NotInDomain);
        }
    }
    let mut lo = hi;
    guard = 0;
    loop {
        lo *= 0.5;
        guard += 1;
        let v = g(lower + lo);
        if v < 0.0 {
            break;
        }
        if guard > 2000 || lo == 0.0 {
            return Err(Error::NotInDomain);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(lower + mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let a = lower + mid;
        if (hi - lo) <= 1e-14 * a.abs().max(hi) {
            break;
        }
    }
    Ok(lower + 0.5 * (lo + hi))
}

/// Value of the zero-thresholding function for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroThreshold {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Intercept root; `None` when the image is outside the domain and both
    /// thresholds are infinite.
    pub alpha0: Option<f64>,
}

impl ZeroThreshold {
    pub fn is_finite(&self) -> bool {
        self.alpha0.is_some()
    }
}

/// Evaluates the zero-thresholding function; holds the intercept image.
#[derive(Debug, Clone)]
pub struct ZeroThresholdFn<'a> {
    model: &'a ForwardModel,
    x0: Vec<f64>,
}

impl<'a> ZeroThresholdFn<'a> {
    pub fn new(model: &'a ForwardModel) -> Result<Self> {
        let x0 = model.intercept_image()?;
        // FFT round-off can leave tiny negative values.
        let x0 = x0.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Self { model, x0 })
    }

    pub fn intercept_image(&self) -> &[f64] {
        &self.x0
    }

    pub fn model(&self) -> &ForwardModel {
        self.model
    }

    pub fn alpha0(&self, y: &[f64]) -> Result<f64> {
        solve_alpha0_null(y, self.model.background(), &self.x0)
    }

    /// Null intensity `e + x0 a`.
    pub fn null_mu(&self, alpha0: f64) -> Vec<f64> {
        self.model.background().iter().zip(&self.x0).map(|(e, x)| e + x * alpha0).collect()
    }

    /// `lambda_i(y)`: for sign-constrained coordinates (king weights and
    /// sources) only the positive part of `X_i^T ((y - mu) / mu)` counts,
    /// since a non-negative coordinate at zero is only pushed upwards by it;
    /// wavelet weights use the absolute value.
    pub fn eval(&self, y: &[f64]) -> Result<ZeroThreshold> {
        check_len("count image", y.len(), self.model.n_pixels())?;
        let alpha0 = match self.alpha0(y) {
            Ok(a) => a,
            Err(Error::NotInDomain) => {
                return Ok(ZeroThreshold { lambda1: f64::INFINITY, lambda2: f64::INFINITY, alpha0: None })
            }
            Err(e) => return Err(e),
        };
        let mu = self.null_mu(alpha0);
        let r: Vec<f64> = y.iter().zip(&mu).map(|(yi, mi)| (yi - mi) / mi).collect();
        let g = self.model.adjoint(&r)?;
        let n_king = self.model.dictionary().n_king();
        let (king, wav) = g.alpha().split_at(n_king);
        let lambda1 = king.iter().map(|v| v.max(0.0)).chain(wav.iter().map(|v| v.abs())).fold(0.0, f64::max);
        let lambda2 = g.s().iter().fold(0.0f64, |m, v| m.max(*v));
        Ok(ZeroThreshold { lambda1, lambda2, alpha0: Some(alpha0) })
    }
}

pub fn zero_threshold(y: &[f64], model: &ForwardModel) -> Result<ZeroThreshold> {
    ZeroThresholdFn::new(model)?.eval(y)
}

/// How the upper quantile is read off the Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFit {
    /// Order statistic when the sample reaches the level, Gumbel beyond it.
    #[default]
    Empirical,
    /// Always a maximum-likelihood Gumbel fit.
    Gumbel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QutConfig {
    /// Level for the dictionary penalty; default `1 / sqrt(pi ln P)`.
    pub alpha1: Option<f64>,
    /// Level for the source penalty; default `1 / N^2`.
    pub alpha2: Option<f64>,
    pub m0: usize,
    pub seed: u64,
    pub tail_fit: TailFit,
}

impl Default for QutConfig {
    fn default() -> Self {
        Self { alpha1: None, alpha2: None, m0: 100, seed: 0, tail_fit: TailFit::Empirical }
    }
}

pub fn default_alpha1(n: usize) -> f64 {
    let p = dyadic_size(n) as f64;
    1.0 / (std::f64::consts::PI * p.ln()).sqrt()
}

pub fn default_alpha2(n: usize) -> f64 {
    1.0 / (n * n) as f64
}

impl QutConfig {
    pub fn levels(&self, n: usize) -> (f64, f64) {
        (self.alpha1.unwrap_or_else(|| default_alpha1(n)), self.alpha2.unwrap_or_else(|| default_alpha2(n)))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (a1, a2) = self.levels(n);
        for (name, a) in [("alpha1", a1), ("alpha2", a2)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {a} must lie in (0, 1)")));
            }
        }
        if self.m0 < 20 {
            return Err(Error::InvalidParameter(format!("m0 = {} must be >= 20", self.m0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileMethod {
    OrderStatistic,
    Gumbel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QutResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha0_hat: f64,
    /// `(Lambda1, Lambda2)` per retained draw, in draw order.
    pub samples: Vec<(f64, f64)>,
    /// Draws outside the domain, dropped from the sample.
    pub dropped: usize,
    pub method1: QuantileMethod,
    pub method2: QuantileMethod,
}

/// Maximum-likelihood Gumbel (maxima) location and scale.
pub fn gumbel_fit(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::InvalidParameter("gumbel fit needs at least two samples".into()));
    }
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Ok((mean, 0.0));
    }
    let xmax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Score for the scale: beta - mean + sum x w / sum w, w = exp(-(x - xmax)/beta)
    let score = |beta: f64| {
        let (mut sw, mut sxw) = (0.0, 0.0);
        for v in x {
            let w = (-(v - xmax) / beta).exp();
            sw += w;
            sxw += v * w;
        }
        beta - mean + sxw / sw
    };
    let mut lo = sd * 1e-3;
    let mut hi = sd * 10.0;
    while score(lo) > 0.0 {
        lo *= 0.5;
    }
    while score(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    let sw: f64 = x.iter().map(|v| (-(v - xmax) / beta).exp()).sum();
    let loc = xmax - beta * (sw / n).ln();
    Ok((loc, beta))
}

/// Upper `alpha` quantile of a sample.
pub fn upper_quantile(sample: &[f64], alpha: f64, tail: TailFit) -> Result<(f64, QuantileMethod)> {
    let m = sample.len();
    if m == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let level = (1.0 - alpha) * m as f64;
    if tail == TailFit::Empirical && level <= (m - 1) as f64 {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = ((level - 1e-9).ceil() as usize).clamp(1, m);
        return Ok((sorted[k - 1], QuantileMethod::OrderStatistic));
    }
    let (loc, scale) = gumbel_fit(sample)?;
    Ok((loc - scale * (-(1.0 - alpha).ln()).ln(), QuantileMethod::Gumbel))
}

/// Monte Carlo thresholds under the null `Y0 ~ Poisson(e + x0 alpha0)`.
pub fn qut_thresholds(model: &ForwardModel, alpha0_hat: f64, cfg: &QutConfig) -> Result<QutResult> {
    cfg.validate(model.n())?;
    let ztf = ZeroThresholdFn::new(model)?;
    let mu0 = ztf.null_mu(alpha0_hat);
    if let Some(i) = mu0.iter().position(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::Domain(format!(
            "null intensity {} at pixel {i} is negative for alpha0 = {alpha0_hat}",
            mu0[i]
        )));
    }
    let draws: Vec<Result<ZeroThreshold>> = (0..cfg.m0 as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, domain::QUT_NULL, k);
            let y0 = poisson_image(&mu0, &mut rng);
            ztf.eval(&y0)
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.m0);
    let mut dropped = 0;
    for d in draws {
        let z = d?;
        if z.is_finite() {
            samples.push((z.lambda1, z.lambda2));
        } else {
            dropped += 1;
        }
    }
    if dropped * 5 > cfg.m0 {
        return Err(Error::DegenerateNull { dropped, total: cfg.m0 });
    }
    let (alpha1, alpha2) = cfg.levels(model.n());
    let l1: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let l2: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (lambda1, method1) = upper_quantile(&l1, alpha1, cfg.tail_fit)?;
    let (lambda2, method2) = upper_quantile(&l2, alpha2, cfg.tail_fit)?;
    Ok(QutResult {
        lambda1: lambda1.max(0.0),
        lambda2: lambda2.max(0.0),
        alpha1,
        alpha2,
        alpha0_hat,
        samples,
        dropped,
        method1,
        method2,
    })
}

/// Thresholds with the null intercept estimated from the observed image.
pub fn qut_for_image(y: &[f64], model: &ForwardModel, cfg: &QutConfig) -> Result<QutResult> {
    let alpha0 = ZeroThresholdFn::new(model)?.alpha0(y)?;
    qut_thresholds(model, alpha0, cfg)
}

/// QUT thresholds followed by the penalized fit they select.
#[derive(Debug, Clone)]
pub struct QutLassoFit {
    pub qut: QutResult,
    pub fit: FitResult,
}

/// Thresholds from the image's null model, then a fit started at the
/// intercept-only point.
pub fn qut_lasso(y: &[f64], model: &ForwardModel, cfg: &QutConfig, opts: &FitOptions) -> Result<QutLassoFit> {
    let alpha0 = ZeroThresholdFn::new(model)?.alpha0(y)?;
    let qut = qut_thresholds(model, alpha0, cfg)?;
    let fit = fit_at(y, model, qut.lambda1, qut.lambda2, alpha0, opts)?;
    Ok(QutLassoFit { qut, fit })
}

/// Fit at fixed penalties from the intercept-only start `(alpha0, 0, 0)`.
pub fn fit_at(
    y: &[f64],
    model: &ForwardModel,
    lambda1: f64,
    lambda2: f64,
    alpha0: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut init = model.zero_coefficients();
    init.set_alpha0(alpha0);
    fit_fista(y, model, lambda1, lambda2, opts, &init)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSceneReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub trials: usize,
    pub reproduced: usize,
    /// Trials whose image fell outside the domain (counted as not reproduced).
    pub outside_domain: usize,
    /// Mean number of non-zero sources per trial.
    pub mean_false_sources: f64,
    /// Solver checks over all trial fits: largest relative objective rise,
    /// converged fits outside the KKT tolerance, fits that did not converge.
    pub max_trace_rise: f64,
    pub kkt_failures: usize,
    pub unconverged: usize,
}

impl ZeroSceneReport {
    pub fn fraction(&self) -> f64 {
        self.reproduced as f64 / self.trials as f64
    }
}

/// Fits `trials` null images at fixed penalties and counts how often the
/// zero scene comes back.
pub fn zero_scene_rate_at(
    model: &ForwardModel,
    alpha0: f64,
    lambda1: f64,
    lambda2: f64,
    trials: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<ZeroSceneReport> {
    let ztf = ZeroThresholdFn::new(model)?;
    let mu0 = ztf.null_mu(alpha0);
    let outcomes: Vec<Result<Option<Trial>>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain::ZERO_SCENE, k);
            let y = poisson_image(&mu0, &mut rng);
            let a0 = match ztf.alpha0(&y) {
                Ok(a) => a,
                Err(Error::NotInDomain) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut init = model.zero_coefficients();
            init.set_alpha0(a0);
            let fit = fit_fista(&y, model, lambda1, lambda2, opts, &init)?;
            let false_sources = fit.coefficients.s().iter().filter(|v| **v > 0.0).count();
            Ok(Some(Trial {
                zero: fit.is_zero_scene(),
                sources: false_sources,
                rise: fit.max_trace_rise(),
                kkt_failed: fit.converged && !fit.kkt_satisfied(),
                converged: fit.converged,
            }))
        })
        .collect();
    let mut reproduced = 0;
    let mut outside = 0;
    let mut sources = 0;
    let (mut rise, mut kkt_failures, mut unconverged) = (0.0f64, 0, 0);
    for o in outcomes {
        match o? {
            None => outside += 1,
            Some(t) => {
                if t.zero {
                    reproduced += 1;
                }
                sources += t.sources;
                rise = rise.max(t.rise);
                kkt_failures += t.kkt_failed as usize;
                unconverged += !t.converged as usize;
            }
        }
    }
    Ok(ZeroSceneReport {
        lambda1,
        lambda2,
        trials,
        reproduced,
        outside_domain: outside,
        mean_false_sources: sources as f64 / trials as f64,
        max_trace_rise: rise,
        kkt_failures,
        unconverged,
    })
}

struct Trial {
    zero: bool,
    sources: usize,
    rise: f64,
    kkt_failed: bool,
    converged: bool,
}

/// Zero-scene reproduction rate at the thresholds computed for `alpha0`.
pub fn zero_scene_rate(
    model: &ForwardModel,
    alpha0: f64,
    cfg: &QutConfig,
    trials: usize,
    opts: &FitOptions,
) -> Result<ZeroSceneReport> {
    if trials < 50 {
        return Err(Error::InvalidParameter(format!("zero-scene rate needs >= 50 trials, got {trials}")));
    }
    let q = qut_thresholds(model, alpha0, cfg)?;
    zero_scene_rate_at(model, alpha0, q.lambda1, q.lambda2, trials, cfg.seed.wrapping_add(1), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_root_noiseless() {
        let x0 = [1.0, 2.0, 0.5, 3.0];
        let e = [0.1, 0.2, 0.0, 0.05];
        let y: Vec<f64> = x0.iter().zip(&e).map(|(x, e)| e + x * 1.7).collect();
        let a = solve_alpha0_null(&y, &e, &x0).unwrap();
        assert!((a - 1.7).abs() < 1e-10 * 1.7);
    }

    #[test]
    fn empty_image_not_in_domain() {
        let r = solve_alpha0_null(&[0.0; 4], &[0.1; 4], &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(r, Err(Error::NotInDomain)));
    }

    #[test]
    fn negative_root_allowed() {
        // counts below the background push the intercept negative
        let x0 = [1.0, 1.0, 1.0, 1.0];
        let e = [1.0; 4];
        let y = [0.0, 1.0, 0.0, 1.0];
        let a = solve_alpha0_null(&y, &e, &x0).unwrap();
        assert!((a + 0.5).abs() < 1e-10);
    }

    #[test]
    fn root_matches_grid_scan() {
        let x0 = [0.3, 1.2, 2.5, 0.9];
        let e = [0.05, 0.4, 0.1, 0.2];
        let y = [0.0, 3.0, 1.0, 2.0];
        let a = solve_alpha0_null(&y, &e, &x0).unwrap();
        let lower = x0.iter().zip(&e).map(|(x, e)| -e / x).fold(f64::NEG_INFINITY, f64::max);
        let g = |a: f64| -> f64 {
            x0.iter().sum::<f64>()
                - x0.iter().zip(&e).zip(&y).map(|((x, e), y)| x * y / (e + x * a)).sum::<f64>()
        };
        // dense scan for the sign change
        let steps = 4_000_000;
        let hi = 20.0;
        let mut prev = lower + 1e-9;
        let mut root = f64::NAN;
        for k in 1..=steps {
            let a = lower + 1e-9 + (hi - lower) * k as f64 / steps as f64;
            if g(prev) < 0.0 && g(a) >= 0.0 {
                root = 0.5 * (prev + a);
                break;
            }
            prev = a;
        }
        assert!((a - root).abs() < (hi - lower) / steps as f64, "{a} vs {root}");
    }

    #[test]
    fn quantile_order_statistic() {
        let sample: Vec<f64> = (1..=100).map(f64::from).rev().collect();
        let (q, m) = upper_quantile(&sample, 0.5, TailFit::Empirical).unwrap();
        assert_eq!(m, QuantileMethod::OrderStatistic);
        assert_eq!(q, 50.0);
        let (_, m) = upper_quantile(&sample, 1e-4, TailFit::Empirical).unwrap();
        assert_eq!(m, QuantileMethod::Gumbel);
    }

    #[test]
    fn gumbel_recovers_parameters() {
        use rand::Rng;
        let mut rng = stream(9, 0, 0);
        let (loc, scale) = (3.0, 0.7);
        let x: Vec<f64> = (0..20000)
            .map(|_| {
                let u: f64 = rng.random_range(1e-12..1.0);
                loc - scale * (-u.ln()).ln()
            })
            .collect();
        let (l, s) = gumbel_fit(&x).unwrap();
        assert!((l - loc).abs() < 0.03 && (s - scale).abs() < 0.03, "{l} {s}");
    }

    #[test]
    fn default_levels() {
        let a1 = default_alpha1(128);
        assert!((a1 - 1.0 / (std::f64::consts::PI * 128f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(default_alpha2(128), 1.0 / 16384.0);
        assert!(QutConfig { m0: 10, ..Default::default() }.validate(32).is_err());
    }
}
