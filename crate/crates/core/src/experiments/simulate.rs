use rand::Rng;

use super::sources::PointSourceSet;
use crate::error::{Error, Result};
use crate::model::{DoubledProfile, ForwardModel, PixelImage};
use crate::rng::poisson_image;

/// `exposure * (e + B(E o (A profile + s)))` for a unit-exposure model.
pub fn expected_image(
    model: &ForwardModel,
    profile: &DoubledProfile,
    sources: &PointSourceSet,
    exposure: f64,
) -> Result<Vec<f64>> {
    if !(exposure >= 0.0 && exposure.is_finite()) {
        return Err(Error::InvalidParameter(format!("exposure {exposure} must be >= 0")));
    }
    if sources.n != model.n() && !sources.is_empty() {
        return Err(Error::DimensionMismatch(format!("sources for n={}, model n={}", sources.n, model.n())));
    }
    let s = if sources.is_empty() { vec![0.0; model.n_pixels()] } else { sources.to_image() };
    let img = model.image_of_profile(profile.values(), &s)?;
    let mu: Vec<f64> = img.iter().zip(model.background()).map(|(a, e)| exposure * (e + a)).collect();
    if let Some(i) = mu.iter().position(|m| !m.is_finite()) {
        return Err(Error::Domain(format!("non-finite intensity at pixel {i}")));
    }
    Ok(mu)
}

pub fn simulate_image<R: Rng + ?Sized>(
    model: &ForwardModel,
    profile: &DoubledProfile,
    sources: &PointSourceSet,
    exposure: f64,
    rng: &mut R,
) -> Result<PixelImage> {
    let mu = expected_image(model, profile, sources, exposure)?;
    PixelImage::new(model.n(), poisson_image(&mu, rng), model.center())
}
