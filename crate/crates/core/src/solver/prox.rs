use crate::model::Coefficients;

/// Layout of the penalized blocks inside a flat coefficient vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Blocks {
    pub n_king: usize,
    pub n_alpha: usize,
}

impl Blocks {
    pub fn of(c: &Coefficients, n_king: usize) -> Self {
        Self { n_king, n_alpha: c.n_alpha() }
    }
}

#[inline]
pub(crate) fn soft(z: f64, thr: f64) -> f64 {
    if z > thr {
        z - thr
    } else if z < -thr {
        z + thr
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn positive_soft(z: f64, thr: f64) -> f64 {
    (z - thr).max(0.0)
}

/// In-place proximal map with per-coordinate steps `t * scale[i]`.
/// `z` is the flat vector `[alpha0 | king | wavelet | s]`.
pub(crate) fn prox_scaled(z: &mut [f64], scale: &[f64], t: f64, l1: f64, l2: f64, b: Blocks) {
    let king_end = 1 + b.n_king;
    let alpha_end = 1 + b.n_alpha;
    for i in 1..z.len() {
        let step = t * scale[i];
        z[i] = if i < king_end {
            positive_soft(z[i], step * l1)
        } else if i < alpha_end {
            soft(z[i], step * l1)
        } else {
            positive_soft(z[i], step * l2)
        };
    }
}

/// Proximal step of the two L1 penalties with sign constraints: the
/// intercept is left alone, king weights and sources are one-sided
/// soft-thresholded, wavelet weights are soft-thresholded.
pub fn prox_step(theta: &Coefficients, n_king: usize, t: f64, lambda1: f64, lambda2: f64) -> Coefficients {
    let mut out = theta.clone();
    let ones = vec![1.0; theta.as_slice().len()];
    prox_scaled(out.as_mut_slice(), &ones, t, lambda1, lambda2, Blocks::of(theta, n_king));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_per_block() {
        // alpha = [king 0.5, king -0.1, wavelet -0.5], s = [0.1, 0.9]
        let c = Coefficients::from_parts(3.0, &[0.5, -0.1, -0.5], &[0.1, 0.9]);
        let p = prox_step(&c, 2, 1.0, 0.2, 0.3);
        assert_eq!(p.alpha0(), 3.0);
        assert!((p.alpha()[0] - 0.3).abs() < 1e-15);
        assert_eq!(p.alpha()[1], 0.0);
        assert!((p.alpha()[2] + 0.3).abs() < 1e-15);
        assert_eq!(p.s()[0], 0.0);
        assert!((p.s()[1] - 0.6).abs() < 1e-15);
    }
}
