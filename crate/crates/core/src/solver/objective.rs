use crate::error::{Error, Result};
use crate::model::image::check_len;
use crate::model::{Coefficients, ForwardModel, PixelImage};

pub const DEFAULT_MU_FLOOR: f64 = 1e-12;

/// `sum(mu - y log mu)`, with `y log mu = 0` where `y = 0`.
pub fn nll(y: &[f64], mu: &[f64]) -> Result<f64> {
    check_len("intensity", mu.len(), y.len())?;
    let mut total = 0.0;
    for (i, (&yi, &mi)) in y.iter().zip(mu).enumerate() {
        if yi > 0.0 {
            if !(mi > 0.0) {
                return Err(Error::Domain(format!(
                    "intensity {mi} at pixel {i} is not positive but the pixel has {yi} counts"
                )));
            }
            total += mi - yi * mi.ln();
        } else {
            total += mi;
        }
    }
    Ok(total)
}

/// Poisson negative log-likelihood of a count image under intensities `mu`.
pub fn neg_log_likelihood(y: &PixelImage, mu: &PixelImage) -> Result<f64> {
    nll(y.values(), mu.values())
}

/// `lambda1 |alpha|_1 + lambda2 |s|_1`
pub fn penalty(c: &Coefficients, lambda1: f64, lambda2: f64) -> f64 {
    let a: f64 = c.alpha().iter().map(|v| v.abs()).sum();
    let s: f64 = c.s().iter().map(|v| v.abs()).sum();
    lambda1 * a + lambda2 * s
}

/// `1 - y / max(mu, floor)`: the image whose transpose-image is the gradient.
pub fn score_residual(y: &[f64], mu: &[f64], floor: f64) -> Result<Vec<f64>> {
    check_len("intensity", mu.len(), y.len())?;
    y.iter()
        .zip(mu)
        .enumerate()
        .map(|(i, (&yi, &mi))| {
            if yi > 0.0 {
                if !(mi > 0.0) {
                    return Err(Error::Domain(format!(
                        "intensity {mi} at pixel {i} is not positive but the pixel has {yi} counts"
                    )));
                }
                Ok(1.0 - yi / mi.max(floor))
            } else {
                Ok(1.0)
            }
        })
        .collect()
}

/// Gradient of the negative log-likelihood over `(alpha0, alpha, s)`:
/// `M^T ((mu - y) / mu)`.
pub fn objective_grad(y: &[f64], model: &ForwardModel, c: &Coefficients) -> Result<Coefficients> {
    objective_grad_with_floor(y, model, c, DEFAULT_MU_FLOOR)
}

pub fn objective_grad_with_floor(
    y: &[f64],
    model: &ForwardModel,
    c: &Coefficients,
    floor: f64,
) -> Result<Coefficients> {
    let mu = model.mu(c)?;
    let r = score_residual(y, &mu, floor)?;
    model.adjoint(&r)
}
