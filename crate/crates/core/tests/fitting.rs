use proptest::prelude::*;
use rand::Rng;

use extremal_design::domain::SpatialGrid;
use extremal_design::fit::{
    empirical_extremogram, fit_variogram_to_extremogram, gpd_fit_mle, gpd_log_likelihood,
    gpd_quantile, gpd_survival, EmpiricalExtremogram, ExtremogramConfig, VariogramFitOptions,
};
use extremal_design::samples::SampleMatrix;
use extremal_design::simulate::Seed;
use extremal_design::variogram::{VariogramFamily, VariogramModel};

fn noise(rows: usize, cols: usize, seed: u64) -> SampleMatrix {
    let mut rng = Seed(seed).stream(0);
    SampleMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random()).collect()).unwrap()
}

/// Bin layout of a real estimate on `grid`, used as a scaffold for
/// model-valued extremograms.
fn layout(grid: &SpatialGrid, sectors: Option<usize>) -> EmpiricalExtremogram {
    let cfg = ExtremogramConfig {
        q: 0.9,
        sectors,
        ..Default::default()
    };
    empirical_extremogram(&noise(300, grid.len(), 1), grid, &cfg).unwrap()
}

fn gpd_sample(n: usize, sigma: f64, xi: f64, seed: u64) -> Vec<f64> {
    let mut rng = Seed(seed).stream(0);
    (0..n)
        .map(|_| gpd_quantile(rng.random(), sigma, xi).unwrap())
        .collect()
}

#[test]
fn noisy_extremogram_recovers_range_and_smoothness() {
    let grid = SpatialGrid::regular_1d(0.0, 30.0, 0.5).unwrap();
    let truth = VariogramModel::power_law(1.5, 2.5).unwrap();
    let mut emp = layout(&grid, None).with_model_values(&truth);
    let mut rng = Seed(2).stream(0);
    for b in &mut emp.bins {
        b.rho = (b.rho + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
    }
    let fit =
        fit_variogram_to_extremogram(&emp, &VariogramFitOptions::new(VariogramFamily::PowerLaw))
            .unwrap();
    assert!((fit.model.alpha / 1.5 - 1.0).abs() < 0.1, "{:?}", fit.model);
    assert!(
        (fit.model.lambda / 2.5 - 1.0).abs() < 0.1,
        "{:?}",
        fit.model
    );
}

#[test]
fn isotropic_truth_gives_unit_anisotropy_ratio() {
    let grid = SpatialGrid::regular_2d((0.0, 0.0), 14, 14, 1.0).unwrap();
    let truth = VariogramModel::stable_fractal(1.3, 0.8, 5.0).unwrap();
    let emp = layout(&grid, Some(4)).with_model_values(&truth);
    let opts = VariogramFitOptions::new(VariogramFamily::StableFractal).anisotropic();
    let fit = fit_variogram_to_extremogram(&emp, &opts).unwrap();
    assert!(
        (fit.model.anisotropy.kappa - 1.0).abs() < 0.1,
        "{:?}",
        fit.model
    );
}

#[test]
fn exponential_sample_has_zero_shape() {
    let x = gpd_sample(5000, 2.0, 0.0, 3);
    let fit = gpd_fit_mle(&x).unwrap();
    assert!(fit.xi.abs() <= 3.0 * fit.standard_errors[1], "{fit:?}");
    assert!(fit.sigma > 0.0);
}

// Reversing the cell order of a line maps every lag h to -h; with one
// direction sector the pair sets, hence the estimates, are unchanged.
#[test]
fn extremogram_is_symmetric_under_lag_negation() {
    let grid = SpatialGrid::regular_1d(0.0, 19.0, 1.0).unwrap();
    let fields = noise(500, 20, 4);
    let reversed = SampleMatrix::from_rows(
        (0..fields.rows())
            .map(|i| fields.row(i).iter().rev().copied().collect())
            .collect(),
    )
    .unwrap();
    let cfg = ExtremogramConfig {
        q: 0.8,
        ..Default::default()
    };
    let a = empirical_extremogram(&fields, &grid, &cfg).unwrap();
    let b = empirical_extremogram(&reversed, &grid, &cfg).unwrap();
    assert_eq!(a.bins.len(), b.bins.len());
    for (x, y) in a.bins.iter().zip(&b.bins) {
        assert_eq!(
            (x.joint, x.marginal, x.pairs),
            (y.joint, y.marginal, y.pairs)
        );
        assert_eq!(x.rho, y.rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn survival_inverts_quantile(p in 0.01f64..0.99, sigma in 0.1f64..10.0, xi in -0.45f64..1.5) {
        let x = gpd_quantile(p, sigma, xi).unwrap();
        let s = gpd_survival(x, sigma, xi).unwrap();
        prop_assert!((1.0 - p - s).abs() < 1e-10);
    }

    #[test]
    fn mle_is_a_stationary_point(sigma in 0.5f64..3.0, xi in -0.3f64..0.8, seed in any::<u64>()) {
        let x = gpd_sample(2000, sigma, xi, seed);
        let fit = gpd_fit_mle(&x).unwrap();
        prop_assume!(!fit.at_bound);
        let ll = |s: f64, k: f64| gpd_log_likelihood(&x, s, k);
        let h = 1e-6;
        let gs = (ll(fit.sigma * (1.0 + h), fit.xi) - ll(fit.sigma * (1.0 - h), fit.xi)) / (2.0 * h * fit.sigma);
        let gx = (ll(fit.sigma, fit.xi + h) - ll(fit.sigma, fit.xi - h)) / (2.0 * h);
        let norm = (gs * gs + gx * gx).sqrt();
        prop_assert!(norm < 1e-4 * (1.0 + fit.log_likelihood.abs()), "gradient {} at {:?}", norm, fit);
        if fit.xi < 0.0 {
            prop_assert!(x.iter().all(|v| *v < -fit.sigma / fit.xi));
        }
    }

    #[test]
    fn extremogram_estimates_are_probabilities(seed in any::<u64>(), q in 0.6f64..0.98) {
        let grid = SpatialGrid::regular_2d((0.0, 0.0), 6, 5, 1.0).unwrap();
        let cfg = ExtremogramConfig { q, ..Default::default() };
        let emp = empirical_extremogram(&noise(200, 30, seed), &grid, &cfg).unwrap();
        for b in &emp.bins {
            prop_assert!((0.0..=1.0).contains(&b.rho));
            prop_assert_eq!(b.reliable, b.pairs >= cfg.min_pairs as u64 && b.marginal > 0);
        }
    }
}
