mod common;

use clusterfit_core::experiments::{expected_image, make_test_profile, simulate_image, PointSourceSet, ProfileName};
use clusterfit_core::model::{Center, DoubledProfile, ForwardModel, PixelImage, PsfModel, RadialGrid, SectorMode};
use clusterfit_core::onion::{onion_baseline, ShellVolumeMatrix, VolumeGeometry};
use rand::Rng;

/// Volume of shell `j` over cylindrical annulus `i`, per unit annulus area,
/// from uniform points in the annulus times a slab that holds the shell.
fn mc_volume(grid: &RadialGrid, i: usize, j: usize, k: usize, rng: &mut impl Rng) -> (f64, f64) {
    let (s0, s1) = (grid.edge(i), grid.edge(i + 1));
    let (r0, r1) = (grid.edge(j), grid.edge(j + 1));
    let mut hits = 0usize;
    for _ in 0..k {
        let s = (s0 * s0 + rng.random::<f64>() * (s1 * s1 - s0 * s0)).sqrt();
        let z = rng.random_range(-r1..r1);
        let r = s.hypot(z);
        if r >= r0 && r < r1 {
            hits += 1;
        }
    }
    let p = hits as f64 / k as f64;
    let slab = 2.0 * r1;
    (slab * p, slab * (p * (1.0 - p) / k as f64).sqrt())
}

#[test]
fn shell_volumes_match_monte_carlo() {
    let grid = RadialGrid::new(8, 10.0).unwrap();
    let v = ShellVolumeMatrix::analytic(grid);
    let mut rng = common::rng(41);
    for _ in 0..20 {
        let i = rng.random_range(0..8);
        let j = rng.random_range(i..8);
        let (est, se) = mc_volume(&grid, i, j, 200_000, &mut rng);
        assert!((v.get(i, j) - est).abs() <= 3.0 * se, "cell ({i},{j}): {} vs {est} +- {se}", v.get(i, j));
    }
    // below the diagonal the annulus lies outside the shell
    assert_eq!(v.get(5, 2), 0.0);
}

fn noiseless(n: usize, profile: &DoubledProfile) -> (ForwardModel, PixelImage) {
    let m = common::model_with(n, PsfModel::identity(), 0.0, SectorMode::LeftRight);
    let mu = expected_image(&m, profile, &PointSourceSet::empty(n), 1.0).unwrap();
    let y = PixelImage::new(n, mu, m.center()).unwrap();
    (m, y)
}

#[test]
fn noiseless_unblurred_recovery_is_exact() {
    for n in [16, 32, 64] {
        let grid = RadialGrid::for_image(n, Center::of_image(n)).unwrap();
        let truth = make_test_profile(ProfileName::Cosmo2, &grid, 0.7).unwrap();
        let (m, y) = noiseless(n, &truth);
        let (prof, est) =
            onion_baseline(&y, m.sensitivity(), m.background(), None, &grid, VolumeGeometry::PixelCenters).unwrap();
        assert!(prof.interpolated.iter().all(|b| !b));
        let want = truth.mean();
        let worst = est
            .emissivity
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "n = {n}: max relative error {worst:e}");
    }
}

#[test]
fn analytic_geometry_is_close_but_not_exact_on_pixels() {
    let n = 64;
    let grid = RadialGrid::for_image(n, Center::of_image(n)).unwrap();
    let truth = make_test_profile(ProfileName::Cosmo1, &grid, 0.05).unwrap();
    let (m, y) = noiseless(n, &truth);
    let (_, est) = onion_baseline(&y, m.sensitivity(), m.background(), None, &grid, VolumeGeometry::Analytic).unwrap();
    let want = truth.mean();
    // interior shells only: the outer ones are cut by the image edge
    for j in 2..grid.n_r() / 2 {
        let rel = (est.emissivity[j] - want[j]).abs() / want[j];
        assert!(rel < 0.1, "shell {j}: {rel}");
    }
}

#[test]
fn masked_pixels_do_not_matter_when_noiseless() {
    let n = 32;
    let grid = RadialGrid::for_image(n, Center::of_image(n)).unwrap();
    let truth = make_test_profile(ProfileName::Cosmo1, &grid, 0.05).unwrap();
    let (m, y) = noiseless(n, &truth);
    let mut mask = vec![false; n * n];
    let mut rng = common::rng(5);
    for _ in 0..40 {
        mask[rng.random_range(0..n * n)] = true;
    }
    let (_, est) =
        onion_baseline(&y, m.sensitivity(), m.background(), Some(&mask), &grid, VolumeGeometry::PixelCenters).unwrap();
    for (a, b) in est.emissivity.iter().zip(truth.mean()) {
        assert!((a - b).abs() <= 1e-8 * b);
    }
}

#[test]
fn low_counts_produce_negative_shells() {
    let n = 64;
    let m = common::model_with(n, PsfModel::identity(), 1e-4, SectorMode::LeftRight);
    let truth = make_test_profile(ProfileName::CosmoBlocks, m.grid(), 0.02).unwrap();
    let mut rng = common::rng(8);
    let y = simulate_image(&m, &truth, &PointSourceSet::empty(n), 1.0, &mut rng).unwrap();
    let (_, est) =
        onion_baseline(&y, m.sensitivity(), m.background(), None, m.grid(), VolumeGeometry::Analytic).unwrap();
    assert!(est.emissivity.iter().any(|v| *v < 0.0));
    assert!(est.clamped.iter().all(|v| *v >= 0.0));
}
