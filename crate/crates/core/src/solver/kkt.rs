use serde::{Deserialize, Serialize};

use super::objective::{score_residual, DEFAULT_MU_FLOOR};
use crate::error::Result;
use crate::model::{Coefficients, ForwardModel};

/// Largest violations of the optimality conditions, per block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `|x0^T ((mu - y) / mu)|`
    pub intercept: f64,
    /// King (non-negative) and wavelet coefficients against `lambda1`.
    pub dictionary: f64,
    /// Point sources (non-negative) against `lambda2`.
    pub sources: f64,
}

fn coordinate(x: f64, g: f64, lambda: f64, nonneg: bool) -> f64 {
    if x > 0.0 {
        (g + lambda).abs()
    } else if x < 0.0 && !nonneg {
        (g - lambda).abs()
    } else if nonneg {
        (-g - lambda).max(0.0)
    } else {
        (g.abs() - lambda).max(0.0)
    }
}

/// Residuals from a precomputed likelihood gradient.
pub fn kkt_from_gradient(
    c: &Coefficients,
    grad: &Coefficients,
    n_king: usize,
    lambda1: f64,
    lambda2: f64,
) -> KktResiduals {
    let dictionary = c
        .alpha()
        .iter()
        .zip(grad.alpha())
        .enumerate()
        .map(|(i, (x, g))| coordinate(*x, *g, lambda1, i < n_king))
        .fold(0.0, f64::max);
    let sources = c
        .s()
        .iter()
        .zip(grad.s())
        .map(|(x, g)| coordinate(*x, *g, lambda2, true))
        .fold(0.0, f64::max);
    KktResiduals { intercept: grad.alpha0().abs(), dictionary, sources }
}

pub fn kkt_residuals(
    y: &[f64],
    model: &ForwardModel,
    c: &Coefficients,
    lambda1: f64,
    lambda2: f64,
) -> Result<KktResiduals> {
    let mu = model.mu(c)?;
    let grad = model.adjoint(&score_residual(y, &mu, DEFAULT_MU_FLOOR)?)?;
    Ok(kkt_from_gradient(c, &grad, model.dictionary().n_king(), lambda1, lambda2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_conditions() {
        // inactive non-negative coordinate only needs g >= -lambda
        assert_eq!(coordinate(0.0, 5.0, 1.0, true), 0.0);
        assert_eq!(coordinate(0.0, -3.0, 1.0, true), 2.0);
        assert_eq!(coordinate(0.0, 5.0, 1.0, false), 4.0);
        assert_eq!(coordinate(2.0, -1.0, 1.0, true), 0.0);
        assert_eq!(coordinate(-2.0, 1.5, 1.0, false), 0.5);
    }
}
