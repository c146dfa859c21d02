//! Newton steps restricted to the current support, where the penalized
//! objective is smooth as long as no coordinate changes sign.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::objective::{nll, penalty, score_residual};
use crate::error::Result;
use crate::model::{Coefficients, ForwardModel};

/// Largest support handled; bigger supports skip the step.
pub const MAX_SUPPORT: usize = 512;

pub(crate) struct Polished {
    pub x: Coefficients,
    pub mu: Vec<f64>,
    pub f: f64,
    pub obj: f64,
}

/// Column images of the linear map, computed on demand and kept for the
/// rest of the fit.
pub(crate) struct ColumnCache<'a> {
    model: &'a ForwardModel,
    cols: HashMap<usize, Vec<f64>>,
}

impl<'a> ColumnCache<'a> {
    pub fn new(model: &'a ForwardModel) -> Self {
        Self { model, cols: HashMap::new() }
    }

    fn ensure(&mut self, j: usize) -> Result<()> {
        if self.cols.contains_key(&j) {
            return Ok(());
        }
        let m = self.model;
        let offset = 1 + m.dictionary().n_penalized();
        let col = if j >= offset {
            // a point source is the PSF stamp scaled by the sensitivity
            let n = m.n();
            let p = j - offset;
            let (px, py) = ((p % n) as isize, (p / n) as isize);
            let e = m.sensitivity().values()[p];
            let psf = m.blur().psf();
            let h = psf.half_width() as isize;
            let mut col = vec![0.0; n * n];
            if e > 0.0 {
                for qy in (py - h).max(0)..=(py + h).min(n as isize - 1) {
                    for qx in (px - h).max(0)..=(px + h).min(n as isize - 1) {
                        col[qy as usize * n + qx as usize] = e * psf.weight(qx - px, qy - py);
                    }
                }
            }
            col
        } else {
            let mut c = m.zero_coefficients();
            c.as_mut_slice()[j] = 1.0;
            m.linear(&c)?
        };
        self.cols.insert(j, col);
        Ok(())
    }

    fn get(&self, j: usize) -> &[f64] {
        &self.cols[&j]
    }
}

/// One safeguarded Newton step on the support of `x` (the intercept is
/// always included). Returns `None` when no decrease was found.
#[allow(clippy::too_many_arguments)]
pub(crate) fn polish_step(
    y: &[f64],
    cache: &mut ColumnCache,
    x: &Coefficients,
    mu: &[f64],
    obj: f64,
    lambda1: f64,
    lambda2: f64,
    floor: f64,
) -> Result<Option<Polished>> {
    let n_alpha = x.n_alpha();
    let theta = x.as_slice();
    let support: Vec<usize> = (0..theta.len()).filter(|&k| k == 0 || theta[k] != 0.0).collect();
    let k = support.len();
    if k > MAX_SUPPORT {
        return Ok(None);
    }
    let model = cache.model;
    let lambda_of = |j: usize| if j == 0 { 0.0 } else if j <= n_alpha { lambda1 } else { lambda2 };

    let grad = model.adjoint(&score_residual(y, mu, floor)?)?;
    let g = DVector::from_iterator(
        k,
        support.iter().map(|&j| grad.as_slice()[j] + lambda_of(j) * theta[j].signum()),
    );

    for &j in &support {
        cache.ensure(j)?;
    }
    let cols: Vec<&[f64]> = support.iter().map(|&j| cache.get(j)).collect();
    let w: Vec<f64> = y.iter().zip(mu).map(|(yi, mi)| if *yi > 0.0 { yi / (mi * mi) } else { 0.0 }).collect();
    let mut h = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        let wa: Vec<f64> = cols[a].iter().zip(&w).map(|(c, w)| c * w).collect();
        for b in a..k {
            let v: f64 = wa.iter().zip(cols[b]).map(|(p, q)| p * q).sum();
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    let ridge = 1e-12 * (0..k).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
    for i in 0..k {
        h[(i, i)] += ridge;
    }
    let Some(chol) = h.cholesky() else { return Ok(None) };
    let delta = -chol.solve(&g);
    let slope = g.dot(&delta);
    if !(slope < 0.0) {
        return Ok(None);
    }

    // projected path: coordinates that would change sign stop at zero
    let mut dmu = vec![0.0; mu.len()];
    for (i, col) in cols.iter().enumerate() {
        for (d, c) in dmu.iter_mut().zip(col.iter()) {
            *d += delta[i] * c;
        }
    }
    let mut tau = 1.0;
    for _ in 0..40 {
        let mut c = x.clone();
        let mut mu_c: Vec<f64> = mu.iter().zip(&dmu).map(|(m, d)| m + tau * d).collect();
        let mut decrease = 0.0;
        for (i, &j) in support.iter().enumerate() {
            let old = theta[j];
            let mut new = old + tau * delta[i];
            if j != 0 && old * new < 0.0 {
                // undo the overshoot past zero in mu
                for (m, cj) in mu_c.iter_mut().zip(cols[i].iter()) {
                    *m -= new * cj;
                }
                new = 0.0;
            }
            c.as_mut_slice()[j] = new;
            decrease += g[i] * (new - old);
        }
        if decrease < 0.0 && y.iter().zip(&mu_c).all(|(yi, mi)| *yi <= 0.0 || *mi > floor) {
            let f_c = nll(y, &mu_c)?;
            let obj_c = f_c + penalty(&c, lambda1, lambda2);
            if obj_c <= obj + 1e-4 * decrease {
                // recompute exactly to keep mu consistent with the coefficients
                let mu_c = model.mu(&c)?;
                let f_c = nll(y, &mu_c)?;
                let obj_c = f_c + penalty(&c, lambda1, lambda2);
                if obj_c < obj {
                    return Ok(Some(Polished { x: c, mu: mu_c, f: f_c, obj: obj_c }));
                }
                return Ok(None);
            }
        }
        tau *= 0.5;
    }
    Ok(None)
}
