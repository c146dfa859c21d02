#![allow(dead_code)]

use clusterfit_core::basis::Dictionary;
use clusterfit_core::model::{
    Center, Coefficients, ForwardModel, PixelImage, PsfModel, RadialGrid, SectorMode, SensitivityMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model_with(n: usize, psf: PsfModel, bg: f64, mode: SectorMode) -> ForwardModel {
    let center = Center::of_image(n);
    let grid = RadialGrid::for_image(n, center).unwrap();
    let dict = Dictionary::default_for(grid).unwrap();
    let background = PixelImage::constant(n, bg, center).unwrap();
    ForwardModel::new(center, psf, SensitivityMap::ones(n), background, dict, mode).unwrap()
}

pub fn model(n: usize) -> ForwardModel {
    model_with(n, PsfModel::build(1.0, 1.5, 1e-3).unwrap(), 0.05, SectorMode::LeftRight)
}

/// Random feasible coefficients: positive intercept, a few positive king
/// weights, small wavelet weights and sparse sources.
pub fn random_coefficients(m: &ForwardModel, rng: &mut ChaCha8Rng) -> Coefficients {
    let mut c = m.zero_coefficients();
    c.set_alpha0(rng.random_range(0.5..2.0));
    let n_king = m.dictionary().n_king();
    for (i, a) in c.alpha_mut().iter_mut().enumerate() {
        if i < n_king {
            if rng.random_bool(0.2) {
                *a = rng.random_range(0.0..0.5);
            }
        } else if rng.random_bool(0.3) {
            *a = rng.random_range(-0.02..0.02);
        }
    }
    for s in c.s_mut() {
        if rng.random_bool(0.05) {
            *s = rng.random_range(0.0..3.0);
        }
    }
    c
}

pub fn poisson(mu: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    clusterfit_core::rng::poisson_image(mu, rng)
}

/// Dense columns of the full linear map, built by pushing unit vectors
/// through the forward model one at a time.
pub fn explicit_columns(m: &ForwardModel) -> Vec<Vec<f64>> {
    let proto = m.zero_coefficients();
    let len = proto.as_slice().len();
    (0..len)
        .map(|k| {
            let mut c = proto.clone();
            c.as_mut_slice()[k] = 1.0;
            m.linear(&c).unwrap()
        })
        .collect()
}
