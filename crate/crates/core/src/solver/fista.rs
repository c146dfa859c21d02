//! Accelerated proximal gradient with backtracking, function-value restart
//! and a diagonal (Jacobi) metric.

use serde::{Deserialize, Serialize};

use super::kkt::{kkt_from_gradient, KktResiduals};
use super::objective::{nll, penalty, score_residual, DEFAULT_MU_FLOOR};
use super::polish::{polish_step, ColumnCache};
use super::prox::{prox_scaled, Blocks};
use crate::error::{Error, Result};
use crate::model::image::check_len;
use crate::model::{Coefficients, ForwardModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Relative objective change below which KKT residuals are checked.
    pub obj_tol: f64,
    /// KKT tolerance relative to the block's penalty level.
    pub kkt_rel: f64,
    /// Absolute floor of the KKT tolerance.
    pub kkt_abs: f64,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    /// Step growth tried at each iteration (>= 1).
    pub grow: f64,
    /// Initial step; `None` uses a power-iteration curvature estimate.
    pub initial_step: Option<f64>,
    /// Reset momentum whenever the objective would increase.
    pub restart: bool,
    /// Scale steps by the inverse curvature diagonal.
    pub precondition: bool,
    /// First iteration at which the metric is refreshed; doubles afterwards.
    pub metric_refresh: usize,
    /// Minimize exactly over the intercept after every accepted step.
    pub refine_intercept: bool,
    /// Newton steps on the current support once progress stalls.
    pub polish: bool,
    pub mu_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            obj_tol: 1e-8,
            kkt_rel: 1e-4,
            kkt_abs: 1e-8,
            shrink: 0.5,
            grow: 1.1,
            initial_step: None,
            restart: true,
            precondition: true,
            metric_refresh: 32,
            refine_intercept: true,
            polish: true,
            mu_floor: DEFAULT_MU_FLOOR,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.obj_tol > 0.0 && self.kkt_rel > 0.0 && self.kkt_abs > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink factor must lie in (0, 1)");
        }
        if !(self.grow >= 1.0 && self.grow.is_finite()) {
            return bad("grow factor must be >= 1");
        }
        if let Some(t) = self.initial_step {
            if !(t > 0.0 && t.is_finite()) {
                return bad("initial step must be > 0");
            }
        }
        if !(self.mu_floor > 0.0) {
            return bad("mu floor must be > 0");
        }
        Ok(())
    }

    /// Per-block KKT tolerances. The intercept is unpenalized, so its
    /// tolerance is relative to `intercept_scale`, the standard deviation of
    /// its score (see [`intercept_scale`]).
    pub fn tolerances(&self, lambda1: f64, lambda2: f64, intercept_scale: f64) -> KktResiduals {
        KktResiduals {
            intercept: (self.kkt_rel * intercept_scale).max(self.kkt_abs),
            dictionary: (self.kkt_rel * lambda1).max(self.kkt_abs),
            sources: (self.kkt_rel * lambda2).max(self.kkt_abs),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Coefficients,
    pub mu: Vec<f64>,
    /// Penalized objective after every accepted iterate (entry 0 is the start).
    pub objective_trace: Vec<f64>,
    pub kkt: KktResiduals,
    pub kkt_tolerance: KktResiduals,
    pub iterations: usize,
    pub restarts: usize,
    /// Accepted Newton steps on the support.
    pub newton_steps: usize,
    pub converged: bool,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }

    pub fn is_zero_scene(&self) -> bool {
        self.coefficients.penalized_is_zero()
    }

    /// Largest increase between consecutive trace entries, relative to
    /// `max(|f|, 1)`; zero for a non-increasing trace.
    pub fn max_trace_rise(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Every KKT residual within its tolerance.
    pub fn kkt_satisfied(&self) -> bool {
        let (r, t) = (&self.kkt, &self.kkt_tolerance);
        r.intercept <= t.intercept && r.dictionary <= t.dictionary && r.sources <= t.sources
    }
}

/// Shift `d` of the intercept minimizing the likelihood with everything
/// else fixed; `mu` is updated in place. Safeguarded Newton on the
/// increasing, concave score `sum x0 - sum x0 y / (mu + d x0)`.
fn refine_intercept(y: &[f64], x0: &[f64], mu: &mut [f64], floor: f64) -> f64 {
    let total: f64 = x0.iter().sum();
    let mut lower = f64::NEG_INFINITY;
    for ((yi, xi), mi) in y.iter().zip(x0).zip(mu.iter()) {
        if *yi > 0.0 && *xi > 0.0 {
            lower = lower.max((floor - mi) / xi);
        }
    }
    if !lower.is_finite() {
        return 0.0;
    }
    let score = |d: f64| -> (f64, f64) {
        let mut g = total;
        let mut h = 0.0;
        for ((yi, xi), mi) in y.iter().zip(x0).zip(mu.iter()) {
            if *yi > 0.0 && *xi > 0.0 {
                let m = mi + d * xi;
                g -= xi * yi / m;
                h += xi * xi * yi / (m * m);
            }
        }
        (g, h)
    };
    let mut d = 0.0;
    let (mut g, mut h) = score(d);
    for _ in 0..50 {
        if !(h > 0.0) || g.abs() <= 1e-13 * total {
            break;
        }
        let mut next = d - g / h;
        if next <= lower {
            next = 0.5 * (d + lower);
        }
        if next == d {
            break;
        }
        d = next;
        (g, h) = score(d);
    }
    if d != 0.0 {
        for (mi, xi) in mu.iter_mut().zip(x0) {
            *mi += d * xi;
        }
    }
    d
}

fn feasible(y: &[f64], mu: &[f64], floor: f64) -> bool {
    y.iter().zip(mu).all(|(yi, mi)| *yi <= 0.0 || *mi > floor)
}

/// Per-pixel curvature of the likelihood, `y / mu^2`.
fn pixel_curvature(y: &[f64], mu: &[f64], floor: f64) -> Vec<f64> {
    y.iter().zip(mu).map(|(yi, mi)| if *yi > 0.0 { yi / mi.max(floor).powi(2) } else { 0.0 }).collect()
}

fn metric(model: &ForwardModel, y: &[f64], mu: &[f64], opts: &FitOptions, len: usize) -> Result<Vec<f64>> {
    if !opts.precondition {
        return Ok(vec![1.0; len]);
    }
    let w = pixel_curvature(y, mu, opts.mu_floor);
    let h = model.curvature_diagonal(&w)?;
    let n_dict = 1 + model.dictionary().n_penalized();
    // Coordinates touching no counted pixel have no curvature; borrow the
    // smallest positive curvature of their block.
    let floor_of = |block: &[f64]| {
        let max = block.iter().cloned().fold(0.0, f64::max);
        block.iter().cloned().filter(|v| *v > 1e-12 * max).fold(f64::INFINITY, f64::min)
    };
    let (fd, fs) = (floor_of(&h[..n_dict]), floor_of(&h[n_dict..]));
    Ok(h.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = if i < n_dict { fd } else { fs };
            let v = if f.is_finite() { v.max(f) } else { 1.0 };
            1.0 / v
        })
        .collect())
}

fn scaled_curvature_norm(model: &ForwardModel, y: &[f64], mu: &[f64], scale: &[f64], floor: f64) -> Result<f64> {
    let w = pixel_curvature(y, mu, floor);
    let mut v = model.zero_coefficients();
    let len = v.as_slice().len();
    for (i, x) in v.as_mut_slice().iter_mut().enumerate() {
        *x = 1.0 + ((i * 7919) % 13) as f64 / 13.0;
    }
    let mut lambda = 0.0;
    for _ in 0..12 {
        let norm = v.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        for (x, s) in v.as_mut_slice().iter_mut().zip(scale) {
            *x *= s.sqrt() / norm;
        }
        let mut img = model.linear(&v)?;
        img.iter_mut().zip(&w).for_each(|(a, b)| *a *= b);
        let mut back = model.adjoint(&img)?;
        for (x, s) in back.as_mut_slice().iter_mut().zip(scale) {
            *x *= s.sqrt();
        }
        let scaled_v: Vec<f64> = v.as_slice().iter().zip(scale).map(|(x, s)| x / s.sqrt()).collect();
        lambda = back.as_slice().iter().zip(&scaled_v).map(|(a, b)| a * b).sum::<f64>();
        debug_assert_eq!(back.as_slice().len(), len);
        v = back;
    }
    Ok(lambda)
}

fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect()
}

/// Minimizes `nll(y, mu(theta)) + lambda1 |alpha|_1 + lambda2 |s|_1` with
/// king weights and sources constrained non-negative.
/// Relative objective change below which a support Newton step is tried.
const POLISH_STALL: f64 = 1e-6;
/// Iterations to wait after a Newton step that made no progress.
const POLISH_BACKOFF: usize = 10;

/// `sqrt(sum x0^2 y / mu^2)`: observed-information scale of the intercept
/// score at `mu`.
pub fn intercept_scale(model: &ForwardModel, y: &[f64], mu: &[f64]) -> Result<f64> {
    let x0 = model.intercept_image()?;
    let info: f64 = x0
        .iter()
        .zip(y)
        .zip(mu)
        .filter(|((_, yi), mi)| **yi > 0.0 && **mi > 0.0)
        .map(|((x, yi), mi)| x * x * yi / (mi * mi))
        .sum();
    Ok(info.sqrt())
}

pub fn fit_fista(
    y: &[f64],
    model: &ForwardModel,
    lambda1: f64,
    lambda2: f64,
    opts: &FitOptions,
    init: &Coefficients,
) -> Result<FitResult> {
    opts.validate()?;
    check_len("count image", y.len(), model.n_pixels())?;
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "penalties must be >= 0 (got {lambda1}, {lambda2})"
        )));
    }
    let n_king = model.dictionary().n_king();
    let blocks = Blocks::of(init, n_king);
    let floor = opts.mu_floor;

    let mut x = init.clone();
    let mut mu_x = model.mu(&x)?;
    if !feasible(y, &mu_x, floor) {
        return Err(Error::Domain("initial point gives non-positive intensity at a counted pixel".into()));
    }
    let mut f_x = nll(y, &mu_x)?;
    let mut obj_x = f_x + penalty(&x, lambda1, lambda2);
    let mut trace = vec![obj_x];

    let len = x.as_slice().len();
    let mut scale = metric(model, y, &mu_x, opts, len)?;
    let mut t = match opts.initial_step {
        Some(t) => t,
        None => {
            let l = scaled_curvature_norm(model, y, &mu_x, &scale, floor)?;
            if l > 0.0 && l.is_finite() {
                1.0 / l
            } else {
                1.0
            }
        }
    };

    let x0 = model.intercept_image()?;
    let tol = opts.tolerances(lambda1, lambda2, intercept_scale(model, y, &mu_x)?);
    let mut z = x.clone();
    let mut mu_z = mu_x.clone();
    let mut f_z = f_x;
    let mut theta = 1.0f64;
    let mut momentum = false;
    let mut next_refresh = opts.metric_refresh.max(1);
    let mut restarts = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_kkt: Option<KktResiduals> = None;
    let mut just_polished = false;
    let mut newton_steps = 0;
    let mut cache = ColumnCache::new(model);
    let mut polish_after = 0;

    let within = |k: &KktResiduals| {
        k.intercept <= tol.intercept && k.dictionary <= tol.dictionary && k.sources <= tol.sources
    };

    while iterations < opts.max_iters {
        let grad = model.adjoint(&score_residual(y, &mu_z, floor)?)?;
        if !momentum {
            // gradient at z == x: check optimality before stepping
            let k = kkt_from_gradient(&x, &grad, n_king, lambda1, lambda2);
            last_kkt = Some(k);
            if within(&k) {
                converged = true;
                break;
            }
        }
        t *= opts.grow;
        let (cand, mu_c, f_c) = loop {
            let mut c = z.clone();
            for ((ci, gi), si) in c.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(&scale) {
                *ci -= t * si * gi;
            }
            prox_scaled(c.as_mut_slice(), &scale, t, lambda1, lambda2, blocks);
            let mu_c = model.mu(&c)?;
            if feasible(y, &mu_c, floor) {
                let f_c = nll(y, &mu_c)?;
                let mut quad = 0.0;
                for (((ci, zi), gi), si) in
                    c.as_slice().iter().zip(z.as_slice()).zip(grad.as_slice()).zip(&scale)
                {
                    let d = ci - zi;
                    if d != 0.0 {
                        quad += gi * d + d * d / (2.0 * t * si);
                    }
                }
                if f_c <= f_z + quad + 1e-12 * f_z.abs() {
                    break (c, mu_c, f_c);
                }
            }
            t *= opts.shrink;
            if t < 1e-300 {
                return Err(Error::NumericalFailure {
                    message: "backtracking step underflow".into(),
                    trace: trace.clone(),
                });
            }
        };
        let obj_c = f_c + penalty(&cand, lambda1, lambda2);
        if !obj_c.is_finite() {
            return Err(Error::NumericalFailure { message: "non-finite objective".into(), trace });
        }
        if obj_c > obj_x {
            if momentum && opts.restart {
                z = x.clone();
                mu_z = mu_x.clone();
                f_z = f_x;
                theta = 1.0;
                momentum = false;
                restarts += 1;
                continue;
            }
            if !momentum {
                // no descent from the current iterate: numerically stationary
                break;
            }
        }
        iterations += 1;
        let x_prev = std::mem::replace(&mut x, cand);
        let mu_prev = std::mem::replace(&mut mu_x, mu_c);
        f_x = f_c;
        let obj_prev = obj_x;
        obj_x = obj_c;
        if opts.refine_intercept {
            let mut mu_r = mu_x.clone();
            let d = refine_intercept(y, &x0, &mut mu_r, floor);
            if d != 0.0 && feasible(y, &mu_r, floor) {
                let f_r = nll(y, &mu_r)?;
                if f_r < f_x {
                    x.set_alpha0(x.alpha0() + d);
                    mu_x = mu_r;
                    obj_x += f_r - f_x;
                    f_x = f_r;
                }
            }
        }
        trace.push(obj_x);

        if iterations >= next_refresh && opts.precondition {
            scale = metric(model, y, &mu_x, opts, len)?;
            next_refresh *= 2;
            momentum = false;
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            theta = theta_next;
            momentum = beta > 0.0;
            if momentum {
                let zc = axpby(1.0 + beta, x.as_slice(), -beta, x_prev.as_slice());
                let mz = axpby(1.0 + beta, &mu_x, -beta, &mu_prev);
                if feasible(y, &mz, floor) {
                    z.as_mut_slice().copy_from_slice(&zc);
                    f_z = nll(y, &mz)?;
                    mu_z = mz;
                } else {
                    momentum = false;
                }
            }
        }
        if !momentum {
            z = x.clone();
            mu_z = mu_x.clone();
            f_z = f_x;
            theta = 1.0;
        }

        let rel = (obj_prev - obj_x).abs() / obj_x.abs().max(1.0);
        if opts.polish && (just_polished || rel < POLISH_STALL) && iterations >= polish_after {
            match polish_step(y, &mut cache, &x, &mu_x, obj_x, lambda1, lambda2, floor)? {
                Some(p) => {
                    x = p.x;
                    mu_x = p.mu;
                    f_x = p.f;
                    obj_x = p.obj;
                    trace.push(obj_x);
                    z = x.clone();
                    mu_z = mu_x.clone();
                    f_z = f_x;
                    theta = 1.0;
                    momentum = false;
                    just_polished = true;
                    newton_steps += 1;
                    continue;
                }
                None => {
                    just_polished = false;
                    polish_after = iterations + POLISH_BACKOFF;
                }
            }
        }
        if rel < opts.obj_tol && momentum {
            let g = model.adjoint(&score_residual(y, &mu_x, floor)?)?;
            let k = kkt_from_gradient(&x, &g, n_king, lambda1, lambda2);
            last_kkt = Some(k);
            if within(&k) {
                converged = true;
                break;
            }
        }
    }

    let kkt = match (converged, last_kkt) {
        (true, Some(k)) => k,
        _ => {
            let g = model.adjoint(&score_residual(y, &mu_x, floor)?)?;
            let k = kkt_from_gradient(&x, &g, n_king, lambda1, lambda2);
            converged = within(&k);
            k
        }
    };
    Ok(FitResult {
        coefficients: x,
        mu: mu_x,
        objective_trace: trace,
        kkt,
        kkt_tolerance: tol,
        iterations,
        restarts,
        newton_steps,
        converged,
        lambda1,
        lambda2,
    })
}
