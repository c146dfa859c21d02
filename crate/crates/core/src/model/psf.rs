//! Point spread function `psf(r) = (1 + (r/r0)^2)^(-alpha)` and the blur it
//! induces on the image plane.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::image::{check_len, check_side};
use crate::error::{Error, Result};

pub const DEFAULT_R0: f64 = 2.2364;
pub const DEFAULT_ALPHA: f64 = 1.449;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsfParams {
    pub r0: f64,
    pub alpha: f64,
    pub tol: f64,
}

impl Default for PsfParams {
    fn default() -> Self {
        Self { r0: DEFAULT_R0, alpha: DEFAULT_ALPHA, tol: DEFAULT_TOL }
    }
}

/// Truncated, unit-sum sampled PSF. `kernel[(dy + h) * (2h + 1) + (dx + h)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfModel {
    pub r0: f64,
    pub alpha: f64,
    pub tol: f64,
    /// Radius beyond which `psf(r) / psf(0) < tol`.
    pub cutoff: f64,
    half_width: usize,
    kernel: Vec<f64>,
}

pub fn psf_profile(r: f64, r0: f64, alpha: f64) -> f64 {
    (1.0 + (r / r0).powi(2)).powf(-alpha)
}

impl PsfModel {
    pub fn build(r0: f64, alpha: f64, tol: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidParameter(format!("psf core radius r0 = {r0} must be > 0")));
        }
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::NonNormalizable(alpha));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidParameter(format!("psf tolerance {tol} must lie in (0, 1)")));
        }
        let cutoff = r0 * (tol.powf(-1.0 / alpha) - 1.0).sqrt();
        let h = cutoff.floor() as usize;
        let side = 2 * h + 1;
        let cut2 = cutoff * cutoff;
        let mut kernel = vec![0.0; side * side];
        for dy in 0..side {
            for dx in 0..side {
                let (ox, oy) = (dx as f64 - h as f64, dy as f64 - h as f64);
                let d2 = ox * ox + oy * oy;
                if d2 <= cut2 {
                    kernel[dy * side + dx] = (1.0 + d2 / (r0 * r0)).powf(-alpha);
                }
            }
        }
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= total);
        Ok(Self { r0, alpha, tol, cutoff, half_width: h, kernel })
    }

    pub fn from_params(p: &PsfParams) -> Result<Self> {
        Self::build(p.r0, p.alpha, p.tol)
    }

    /// Kernel that leaves images untouched.
    pub fn identity() -> Self {
        Self { r0: 0.0, alpha: f64::INFINITY, tol: 1.0, cutoff: 0.0, half_width: 0, kernel: vec![1.0] }
    }

    /// Element-wise square of this kernel (not normalized); its blur gives
    /// the squared column norms needed for curvature estimates.
    pub fn squared(&self) -> Self {
        Self { kernel: self.kernel.iter().map(|k| k * k).collect(), ..self.clone() }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Kernel weight at integer offset `(dx, dy)`; zero outside the support.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let h = self.half_width as isize;
        if dx.abs() > h || dy.abs() > h {
            return 0.0;
        }
        let side = 2 * h + 1;
        self.kernel[((dy + h) * side + dx + h) as usize]
    }
}

fn fast_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * min.max(1) {
        let mut v = p2;
        while v < min {
            v *= 3;
        }
        best = best.min(v);
        p2 *= 2;
    }
    best
}

#[derive(Clone)]
struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, m);
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, m);
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Linear convolution with the PSF kernel, zero outside the field of view.
#[derive(Clone)]
pub struct BlurOperator {
    n: usize,
    psf: PsfModel,
    fft: Option<Fft2>,
    spectrum: Vec<Complex64>,
}

impl fmt::Debug for BlurOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlurOperator")
            .field("n", &self.n)
            .field("half_width", &self.psf.half_width)
            .field("fft_size", &self.fft.as_ref().map(|f| f.m))
            .finish()
    }
}

impl BlurOperator {
    pub fn new(psf: PsfModel, n: usize) -> Result<Self> {
        check_side(n)?;
        let h = psf.half_width.min(n - 1);
        if h == 0 {
            return Ok(Self { n, psf, fft: None, spectrum: Vec::new() });
        }
        let m = fast_size(n + h);
        let fft = Fft2::new(m);
        let mut spectrum = vec![Complex64::default(); m * m];
        let hi = h as isize;
        for dy in -hi..=hi {
            for dx in -hi..=hi {
                let w = psf.weight(dx, dy);
                if w != 0.0 {
                    let iy = dy.rem_euclid(m as isize) as usize;
                    let ix = dx.rem_euclid(m as isize) as usize;
                    spectrum[iy * m + ix] = Complex64::new(w, 0.0);
                }
            }
        }
        fft.transform(&mut spectrum, false);
        let scale = 1.0 / (m * m) as f64;
        spectrum.iter_mut().for_each(|c| *c *= scale);
        Ok(Self { n, psf, fft: Some(fft), spectrum })
    }

    pub fn psf(&self) -> &PsfModel {
        &self.psf
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn run(&self, input: &[f64], out: &mut [f64], adjoint: bool) -> Result<()> {
        let n = self.n;
        check_len("blur input", input.len(), n * n)?;
        check_len("blur output", out.len(), n * n)?;
        let Some(fft) = &self.fft else {
            let w = self.psf.kernel[0];
            out.iter_mut().zip(input).for_each(|(o, i)| *o = w * i);
            return Ok(());
        };
        let m = fft.m;
        let mut buf = vec![Complex64::default(); m * m];
        for y in 0..n {
            for x in 0..n {
                buf[y * m + x].re = input[y * n + x];
            }
        }
        fft.transform(&mut buf, false);
        if adjoint {
            buf.iter_mut().zip(&self.spectrum).for_each(|(b, k)| *b *= k.conj());
        } else {
            buf.iter_mut().zip(&self.spectrum).for_each(|(b, k)| *b *= k);
        }
        fft.transform(&mut buf, true);
        for y in 0..n {
            for x in 0..n {
                out[y * n + x] = buf[y * m + x].re;
            }
        }
        Ok(())
    }

    pub fn apply_into(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.run(input, out, false)
    }

    /// Correlation with the kernel: the exact transpose of the blur.
    pub fn adjoint_into(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        self.run(input, out, true)
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n * self.n];
        self.apply_into(input, &mut out)?;
        Ok(out)
    }

    pub fn adjoint(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n * self.n];
        self.adjoint_into(input, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::image::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(psf: &PsfModel, n: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for py in 0..n {
            for px in 0..n {
                let mut acc = 0.0;
                for qy in 0..n {
                    for qx in 0..n {
                        acc += psf.weight(px as isize - qx as isize, py as isize - qy as isize)
                            * x[qy * n + qx];
                    }
                }
                out[py * n + px] = acc;
            }
        }
        out
    }

    #[test]
    fn default_kernel_normalized() {
        let p = PsfModel::build(DEFAULT_R0, DEFAULT_ALPHA, DEFAULT_TOL).unwrap();
        let s: f64 = p.kernel().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.kernel().iter().all(|k| *k >= 0.0));
    }

    #[test]
    fn tiny_core_is_delta() {
        let p = PsfModel::build(1e-3, DEFAULT_ALPHA, DEFAULT_TOL).unwrap();
        assert!(p.weight(0, 0) > 0.999);
    }

    #[test]
    fn kernel_radially_symmetric() {
        let p = PsfModel::build(DEFAULT_R0, DEFAULT_ALPHA, 1e-3).unwrap();
        let h = p.half_width() as isize;
        for dy in -h..=h {
            for dx in -h..=h {
                let w = p.weight(dx, dy);
                assert_eq!(w, p.weight(-dx, -dy));
                assert_eq!(w, p.weight(dy, dx));
            }
        }
    }

    #[test]
    fn non_integrable_slope_rejected() {
        assert!(matches!(PsfModel::build(2.0, 1.0, 1e-4), Err(Error::NonNormalizable(_))));
        assert!(PsfModel::build(0.0, 1.5, 1e-4).is_err());
        assert!(PsfModel::build(2.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let psf = PsfModel::build(1.5, 1.449, 1e-2).unwrap();
        let n = 12;
        let b = BlurOperator::new(psf.clone(), n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
        let fast = b.apply(&x).unwrap();
        let slow = direct(&psf, n, &x);
        for (a, c) in fast.iter().zip(&slow) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_interior_preserved() {
        let psf = PsfModel::build(1.0, 2.0, 1e-3).unwrap();
        let h = psf.half_width();
        let n = 2 * h + 9;
        let b = BlurOperator::new(psf, n).unwrap();
        let out = b.apply(&vec![2.5; n * n]).unwrap();
        let mid = n / 2;
        assert!((out[mid * n + mid] - 2.5).abs() < 1e-10);
    }

    #[test]
    fn delta_gives_kernel() {
        let psf = PsfModel::build(1.0, 1.8, 1e-2).unwrap();
        let h = psf.half_width();
        let n = 2 * h + 5;
        let b = BlurOperator::new(psf.clone(), n).unwrap();
        let c = n / 2;
        let mut x = vec![0.0; n * n];
        x[c * n + c] = 1.0;
        let out = b.apply(&x).unwrap();
        for y in 0..n {
            for xx in 0..n {
                let want = psf.weight(xx as isize - c as isize, y as isize - c as isize);
                assert!((out[y * n + xx] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let b = BlurOperator::new(PsfModel::build(DEFAULT_R0, DEFAULT_ALPHA, DEFAULT_TOL).unwrap(), 16)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&b.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &b.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(182), 192);
        assert_eq!(fast_size(63), 64);
        assert_eq!(fast_size(9), 9);
    }
}
