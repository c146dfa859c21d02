//! Poisson intensity `mu = e + B(E o (A(alpha0 1 + Phi alpha) + s))` and the
//! transpose of its linear part.

use super::abel::{AbelOperator, SectorMode};
use super::grid::{DoubledProfile, RadialGrid};
use super::image::{check_len, Center, PixelImage};
use super::psf::{BlurOperator, PsfModel};
use crate::basis::Dictionary;
use crate::error::{Error, Result};

/// Per-pixel detection efficiency in `[0, 1]`; zero marks dead pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    n: usize,
    values: Vec<f64>,
}

impl SensitivityMap {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_len("sensitivity map", values.len(), n * n)?;
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!(
                "sensitivity at pixel {i} is {} (must lie in [0, 1])",
                values[i]
            )));
        }
        Ok(Self { n, values })
    }

    pub fn ones(n: usize) -> Self {
        Self { n, values: vec![1.0; n * n] }
    }

    /// Copy with the listed pixels switched off.
    pub fn with_dead(&self, pixels: impl IntoIterator<Item = usize>) -> Self {
        let mut values = self.values.clone();
        for p in pixels {
            values[p] = 0.0;
        }
        Self { n: self.n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Flat parameter vector `[alpha0 | alpha (king | wavelet) | s (n*n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    n_alpha: usize,
    data: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(n_alpha: usize, n_pixels: usize) -> Self {
        Self { n_alpha, data: vec![0.0; 1 + n_alpha + n_pixels] }
    }

    pub fn from_parts(alpha0: f64, alpha: &[f64], s: &[f64]) -> Self {
        let mut data = Vec::with_capacity(1 + alpha.len() + s.len());
        data.push(alpha0);
        data.extend_from_slice(alpha);
        data.extend_from_slice(s);
        Self { n_alpha: alpha.len(), data }
    }

    pub fn alpha0(&self) -> f64 {
        self.data[0]
    }

    pub fn set_alpha0(&mut self, v: f64) {
        self.data[0] = v;
    }

    pub fn alpha(&self) -> &[f64] {
        &self.data[1..1 + self.n_alpha]
    }

    pub fn alpha_mut(&mut self) -> &mut [f64] {
        &mut self.data[1..1 + self.n_alpha]
    }

    pub fn s(&self) -> &[f64] {
        &self.data[1 + self.n_alpha..]
    }

    pub fn s_mut(&mut self) -> &mut [f64] {
        &mut self.data[1 + self.n_alpha..]
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Non-zero point sources as `(pixel, intensity)`.
    pub fn sources(&self) -> Vec<(usize, f64)> {
        self.s().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
    }

    pub fn penalized_is_zero(&self) -> bool {
        self.data[1..].iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ForwardModel {
    n: usize,
    center: Center,
    abel: AbelOperator,
    blur: BlurOperator,
    sensitivity: SensitivityMap,
    background: Vec<f64>,
    dict: Dictionary,
}

impl ForwardModel {
    pub fn new(
        center: Center,
        psf: PsfModel,
        sensitivity: SensitivityMap,
        background: PixelImage,
        dict: Dictionary,
        mode: SectorMode,
    ) -> Result<Self> {
        let n = background.n();
        if sensitivity.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "sensitivity is {}x{}, background is {n}x{n}",
                sensitivity.n(),
                sensitivity.n()
            )));
        }
        let grid = *dict.grid();
        let abel = AbelOperator::new(n, center, grid, mode)?;
        let blur = BlurOperator::new(psf, n)?;
        Ok(Self { n, center, abel, blur, sensitivity, background: background.into_values(), dict })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_pixels(&self) -> usize {
        self.n * self.n
    }

    pub fn center(&self) -> Center {
        self.center
    }

    pub fn grid(&self) -> &RadialGrid {
        self.abel.grid()
    }

    pub fn abel(&self) -> &AbelOperator {
        &self.abel
    }

    pub fn blur(&self) -> &BlurOperator {
        &self.blur
    }

    pub fn sensitivity(&self) -> &SensitivityMap {
        &self.sensitivity
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn sector_mode(&self) -> SectorMode {
        self.abel.mode()
    }

    pub fn zero_coefficients(&self) -> Coefficients {
        Coefficients::zeros(self.dict.n_penalized(), self.n_pixels())
    }

    fn check_coeffs(&self, c: &Coefficients) -> Result<()> {
        if c.n_alpha() != self.dict.n_penalized() || c.s().len() != self.n_pixels() {
            return Err(Error::Layout(format!(
                "coefficients have {} dictionary and {} source entries; model needs {} and {}",
                c.n_alpha(),
                c.s().len(),
                self.dict.n_penalized(),
                self.n_pixels()
            )));
        }
        Ok(())
    }

    /// `B(E o (A profile + s))` for a raw doubled profile and a source image.
    pub fn image_of_profile(&self, profile: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        check_len("source image", s.len(), self.n_pixels())?;
        let mut tmp = self.abel.apply(profile)?;
        for ((t, si), e) in tmp.iter_mut().zip(s).zip(&self.sensitivity.values) {
            *t = e * (*t + si);
        }
        self.blur.apply(&tmp)
    }

    /// Linear part `B(E o (A Phi~ theta + s))`.
    pub fn linear_into(&self, c: &Coefficients, out: &mut [f64]) -> Result<()> {
        self.check_coeffs(c)?;
        let mut profile = vec![0.0; self.dict.profile_len()];
        self.dict.synthesize_into(c.alpha0(), c.alpha(), &mut profile)?;
        let mut tmp = self.abel.apply(&profile)?;
        for ((t, si), e) in tmp.iter_mut().zip(c.s()).zip(&self.sensitivity.values) {
            *t = e * (*t + si);
        }
        self.blur.apply_into(&tmp, out)
    }

    pub fn linear(&self, c: &Coefficients) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_pixels()];
        self.linear_into(c, &mut out)?;
        Ok(out)
    }

    /// Transpose of [`linear`](Self::linear) applied to an image.
    pub fn adjoint(&self, r: &[f64]) -> Result<Coefficients> {
        check_len("adjoint input", r.len(), self.n_pixels())?;
        let mut t = self.blur.adjoint(r)?;
        t.iter_mut().zip(&self.sensitivity.values).for_each(|(v, e)| *v *= e);
        let back = self.abel.adjoint(&t)?;
        let mut out = self.zero_coefficients();
        let a0 = self.dict.adjoint_into(&back, out.alpha_mut())?;
        out.set_alpha0(a0);
        out.s_mut().copy_from_slice(&t);
        Ok(out)
    }

    /// Curvature diagonal `sum_p M_pi^2 w_p` for every coordinate, given
    /// per-pixel weights `w`. Costs one column image per dictionary entry.
    pub fn curvature_diagonal(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("curvature weights", w.len(), self.n_pixels())?;
        let n_alpha = self.dict.n_penalized();
        let zeros = vec![0.0; self.n_pixels()];
        let mut out = Vec::with_capacity(1 + n_alpha + self.n_pixels());
        let column_norm = |profile: &[f64]| -> Result<f64> {
            let img = self.image_of_profile(profile, &zeros)?;
            Ok(img.iter().zip(w).map(|(c, wi)| c * c * wi).sum())
        };
        out.push(column_norm(&vec![1.0; self.dict.profile_len()])?);
        let mut unit = vec![0.0; n_alpha];
        let mut profile = vec![0.0; self.dict.profile_len()];
        for i in 0..n_alpha {
            unit[i] = 1.0;
            self.dict.synthesize_into(0.0, &unit, &mut profile)?;
            unit[i] = 0.0;
            out.push(column_norm(&profile)?);
        }
        let squared = BlurOperator::new(self.blur.psf().squared(), self.n)?;
        let src = squared.adjoint(w)?;
        out.extend(src.iter().zip(&self.sensitivity.values).map(|(v, e)| v * e * e));
        Ok(out)
    }

    pub fn mu(&self, c: &Coefficients) -> Result<Vec<f64>> {
        let mut out = self.linear(c)?;
        out.iter_mut().zip(&self.background).for_each(|(o, e)| *o += e);
        Ok(out)
    }

    /// `x0 = B(E o A 1)`: the image of a unit intercept.
    pub fn intercept_image(&self) -> Result<Vec<f64>> {
        let ones = vec![1.0; self.dict.profile_len()];
        self.image_of_profile(&ones, &vec![0.0; self.n_pixels()])
    }

    pub fn profile_of(&self, c: &Coefficients) -> Result<DoubledProfile> {
        self.dict.synthesize(c.alpha0(), c.alpha())
    }
}

/// `mu` as a validated image.
pub fn forward_mu(model: &ForwardModel, alpha0: f64, alpha: &[f64], s: &[f64]) -> Result<PixelImage> {
    let mu = model.mu(&Coefficients::from_parts(alpha0, alpha, s))?;
    let clean: Vec<f64> = mu.into_iter().map(|v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
    PixelImage::new(model.n(), clean, model.center())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Dictionary;

    fn model(n: usize) -> ForwardModel {
        let c = Center::of_image(n);
        let grid = RadialGrid::for_image(n, c).unwrap();
        ForwardModel::new(
            c,
            PsfModel::build(1.2, 1.6, 1e-3).unwrap(),
            SensitivityMap::ones(n),
            PixelImage::constant(n, 1e-4, c).unwrap(),
            Dictionary::default_for(grid).unwrap(),
            SectorMode::LeftRight,
        )
        .unwrap()
    }

    #[test]
    fn zero_scene_is_background() {
        let m = model(16);
        let mu = m.mu(&m.zero_coefficients()).unwrap();
        assert!(mu.iter().all(|v| *v == 1e-4));
    }

    #[test]
    fn dead_pixel_hides_source() {
        let m0 = model(16);
        let dead = 7 * 16 + 9;
        let m = ForwardModel::new(
            m0.center(),
            m0.blur().psf().clone(),
            SensitivityMap::ones(16).with_dead([dead]),
            PixelImage::constant(16, 1e-4, m0.center()).unwrap(),
            m0.dictionary().clone(),
            SectorMode::LeftRight,
        )
        .unwrap();
        let mut c = m.zero_coefficients();
        c.s_mut()[dead] = 5.0;
        let mu = m.mu(&c).unwrap();
        assert!(mu.iter().all(|v| (*v - 1e-4).abs() < 1e-15));
        let g = m.adjoint(&vec![1.0; 256]).unwrap();
        assert_eq!(g.s()[dead], 0.0);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let m = model(16);
        let c = Coefficients::zeros(3, 256);
        assert!(matches!(m.mu(&c), Err(Error::Layout(_))));
    }

    #[test]
    fn sources_listing() {
        let mut c = Coefficients::zeros(2, 4);
        c.s_mut()[2] = 0.5;
        assert_eq!(c.sources(), vec![(2, 0.5)]);
        assert!(!c.penalized_is_zero());
    }
}
