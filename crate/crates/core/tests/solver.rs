mod common;

use clusterfit_core::model::{PsfModel, SectorMode};
use clusterfit_core::qut::{solve_alpha0_null, zero_threshold};
use clusterfit_core::solver::{fit_fista, kkt_residuals, nll, objective_grad, FitOptions};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-6;
    for inst in 0..20u64 {
        let mut r = rng(100 + inst);
        let m = model(16);
        let c = random_coefficients(&m, &mut r);
        let mu = m.mu(&c).unwrap();
        let y = poisson(&mu, &mut r);
        let g = objective_grad(&y, &m, &c).unwrap();
        let len = c.as_slice().len();
        let mut coords = vec![0usize];
        coords.extend((0..24).map(|_| r.random_range(1..len)));
        for k in coords {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp.as_mut_slice()[k] += h;
            cm.as_mut_slice()[k] -= h;
            let mp = m.mu(&cp).unwrap();
            let mm = m.mu(&cm).unwrap();
            // per-pixel differences summed, to keep cancellation out of the totals
            let diff: f64 = mp
                .iter()
                .zip(&mm)
                .zip(&y)
                .map(|((a, b), yi)| (a - b) - if *yi > 0.0 { yi * (a / b).ln() } else { 0.0 })
                .sum();
            let fd = diff / (2.0 * h);
            let an = g.as_slice()[k];
            assert!(
                (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                "instance {inst} coord {k}: fd {fd} vs {an}"
            );
        }
    }
}

#[test]
fn gradient_vanishes_at_exact_fit() {
    let mut r = rng(3);
    let m = model(16);
    let c = random_coefficients(&m, &mut r);
    let y = m.mu(&c).unwrap();
    let g = objective_grad(&y, &m, &c).unwrap();
    assert!(g.as_slice().iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn source_gradient_zero_at_dead_pixel() {
    use clusterfit_core::basis::Dictionary;
    use clusterfit_core::model::{Center, ForwardModel, PixelImage, RadialGrid, SensitivityMap};
    let n = 16;
    let center = Center::of_image(n);
    let grid = RadialGrid::for_image(n, center).unwrap();
    let dead = 5 * n + 7;
    let m = ForwardModel::new(
        center,
        PsfModel::identity(),
        SensitivityMap::ones(n).with_dead([dead]),
        PixelImage::constant(n, 0.1, center).unwrap(),
        Dictionary::default_for(grid).unwrap(),
        SectorMode::LeftRight,
    )
    .unwrap();
    let mut r = rng(4);
    let c = random_coefficients(&m, &mut r);
    let y = poisson(&m.mu(&c).unwrap(), &mut r);
    let g = objective_grad(&y, &m, &c).unwrap();
    assert_eq!(g.s()[dead], 0.0);
}

fn bisect_intercept(y: &[f64], e: &[f64], x0: &[f64]) -> f64 {
    let score = |a: f64| -> f64 { x0.iter().zip(e).zip(y).map(|((x, e), y)| x - x * y / (e + x * a)).sum() };
    let lo0 = x0.iter().zip(e).filter(|(x, _)| **x > 0.0).map(|(x, e)| -e / x).fold(f64::MIN, f64::max);
    let (mut lo, mut hi) = (lo0 + 1e-12, 1e6);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if score(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn intercept_only_fit_is_scalar_mle() {
    // penalties far above any gradient leave only the intercept free
    let m = model(8);
    let mut r = rng(5);
    let mut c = m.zero_coefficients();
    c.set_alpha0(3.0);
    let y: Vec<f64> = poisson(&m.mu(&c).unwrap(), &mut r).iter().map(|v| v + 1.0).collect();
    let x0 = m.intercept_image().unwrap();
    let oracle = bisect_intercept(&y, m.background(), &x0);
    let mut init = m.zero_coefficients();
    init.set_alpha0(1.0);
    let fit = fit_fista(&y, &m, 1e9, 1e9, &FitOptions::default(), &init).unwrap();
    assert!(fit.converged);
    assert!(fit.coefficients.penalized_is_zero());
    let a = fit.coefficients.alpha0();
    assert!((a - oracle).abs() <= 1e-6 * oracle.abs(), "{a} vs {oracle}");
}

#[test]
fn noiseless_single_king_atom() {
    let n = 32;
    let m = model(n);
    let mut truth = m.zero_coefficients();
    let atom = m.dictionary().n_king() / 3;
    truth.alpha_mut()[atom] = 40.0;
    let y = m.mu(&truth).unwrap();
    let mut init = m.zero_coefficients();
    init.set_alpha0(solve_alpha0_null(&y, m.background(), &m.intercept_image().unwrap()).unwrap());
    let fit = fit_fista(&y, &m, 1e-6, 1e-6, &FitOptions::default(), &init).unwrap();
    let worst = fit.mu.iter().zip(&y).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-3, "max relative error {worst}");
}

#[test]
fn above_zero_threshold_returns_zero_scene() {
    let m = model(16);
    for seed in 0..5 {
        let mut r = rng(200 + seed);
        let c = random_coefficients(&m, &mut r);
        let y = poisson(&m.mu(&c).unwrap(), &mut r);
        let z = zero_threshold(&y, &m).unwrap();
        let a0 = z.alpha0.unwrap();
        let mut init = m.zero_coefficients();
        init.set_alpha0(a0);
        let fit = fit_fista(&y, &m, 1.001 * z.lambda1, 1.001 * z.lambda2, &FitOptions::default(), &init).unwrap();
        assert!(fit.coefficients.penalized_is_zero());
        assert!((fit.coefficients.alpha0() - a0).abs() <= 1e-8 * a0.abs().max(1.0));
        // at the boundary the zero point is stationary
        let k = kkt_residuals(&y, &m, &init, z.lambda1, z.lambda2).unwrap();
        assert!(k.dictionary <= 1e-8 && k.sources <= 1e-8, "{k:?}");

        let opts = FitOptions { max_iters: 500, ..Default::default() };
        let fit = fit_fista(&y, &m, 0.9 * z.lambda1, 0.9 * z.lambda2, &opts, &init).unwrap();
        assert!(!fit.coefficients.penalized_is_zero());
    }
}

#[test]
fn kkt_matches_explicit_columns() {
    let m = model(8);
    let cols = explicit_columns(&m);
    let n_king = m.dictionary().n_king();
    let n_alpha = m.dictionary().n_penalized();
    for seed in 0..5 {
        let mut r = rng(300 + seed);
        let c = random_coefficients(&m, &mut r);
        let mu = m.mu(&c).unwrap();
        let y = poisson(&mu, &mut r);
        let (l1, l2) = (r.random_range(0.1..2.0), r.random_range(0.1..2.0));
        let k = kkt_residuals(&y, &m, &c, l1, l2).unwrap();
        let w: Vec<f64> = y.iter().zip(&mu).map(|(y, m)| 1.0 - y / m).collect();
        let theta = c.as_slice();
        let (mut r0, mut r1, mut r2) = (0.0f64, 0.0f64, 0.0f64);
        for (j, col) in cols.iter().enumerate() {
            let g: f64 = col.iter().zip(&w).map(|(a, b)| a * b).sum();
            let x = theta[j];
            if j == 0 {
                r0 = g.abs();
                continue;
            }
            let (lam, nonneg) = if j <= n_alpha { (l1, j <= n_king) } else { (l2, true) };
            let v = if x > 0.0 {
                (g + lam).abs()
            } else if x < 0.0 {
                (g - lam).abs()
            } else if nonneg {
                (-g - lam).max(0.0)
            } else {
                (g.abs() - lam).max(0.0)
            };
            if j <= n_alpha {
                r1 = r1.max(v)
            } else {
                r2 = r2.max(v)
            }
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(k.intercept, r0) && close(k.dictionary, r1) && close(k.sources, r2), "{k:?} vs {r0} {r1} {r2}");
    }
}

#[test]
fn halving_penalties_does_not_worsen_fit() {
    let m = model(16);
    let mut r = rng(9);
    let c = random_coefficients(&m, &mut r);
    let y = poisson(&m.mu(&c).unwrap(), &mut r);
    let z = zero_threshold(&y, &m).unwrap();
    let mut init = m.zero_coefficients();
    init.set_alpha0(z.alpha0.unwrap());
    let opts = FitOptions::default();
    let a = fit_fista(&y, &m, 0.5 * z.lambda1, 0.5 * z.lambda2, &opts, &init).unwrap();
    let b = fit_fista(&y, &m, 0.25 * z.lambda1, 0.25 * z.lambda2, &opts, &init).unwrap();
    assert!(nll(&y, &b.mu).unwrap() <= nll(&y, &a.mu).unwrap() + 1e-6);
}

#[test]
fn infeasible_init_rejected() {
    let m = model(8);
    let y = vec![1.0; 64];
    let mut init = m.zero_coefficients();
    init.set_alpha0(-10.0);
    assert!(fit_fista(&y, &m, 1.0, 1.0, &FitOptions::default(), &init).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trace_is_monotone_and_mu_positive(seed in 0u64..1000, scale in 0.05f64..0.8, sym in any::<bool>()) {
        let mode = if sym { SectorMode::Symmetric } else { SectorMode::LeftRight };
        let m = model_with(16, PsfModel::build(1.2, 1.4, 1e-3).unwrap(), 0.02, mode);
        let mut r = rng(seed);
        let c = random_coefficients(&m, &mut r);
        let y = poisson(&m.mu(&c).unwrap(), &mut r);
        let z = zero_threshold(&y, &m).unwrap();
        prop_assume!(z.alpha0.is_some());
        let mut init = m.zero_coefficients();
        init.set_alpha0(z.alpha0.unwrap());
        let opts = FitOptions { max_iters: 400, ..Default::default() };
        let fit = fit_fista(&y, &m, scale * z.lambda1, scale * z.lambda2, &opts, &init).unwrap();
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
        for (yi, mi) in y.iter().zip(&fit.mu) {
            if *yi > 0.0 { prop_assert!(*mi > 0.0); }
        }
        let (king, _) = m.dictionary().split(fit.coefficients.alpha());
        prop_assert!(king.iter().all(|v| *v >= 0.0));
        prop_assert!(fit.coefficients.s().iter().all(|v| *v >= 0.0));
    }
}
