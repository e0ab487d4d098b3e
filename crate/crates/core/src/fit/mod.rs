//! Statistical estimation: generalized Pareto tails, the covariate-driven
//! location function, empirical extremograms, variogram least squares and
//! QQ diagnostics.

mod extremogram;
mod gpd;
mod location;
mod optim;
mod qq;
mod variogram_fit;

pub use extremogram::{
    empirical_extremogram, EmpiricalExtremogram, ExtremogramBin, ExtremogramConfig,
};
pub use gpd::{
    fit_scale_shape_pooled, gpd_fit_mle, gpd_log_likelihood, gpd_quantile, gpd_survival,
    pooled_log_likelihood, GpdFit, PooledFit, XI_BOUNDS,
};
pub use location::{fit_location_covariate, LocationModelFit};
pub use optim::{nelder_mead, NelderMeadResult};
pub use qq::{qq_plot_data, QqPoint};
pub use variogram_fit::{fit_variogram_to_extremogram, VariogramFit, VariogramFitOptions};

/// Empirical quantile with linear interpolation between order statistics
/// (`(n - 1) q` positions). NaNs must be removed by the caller.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, q)
}

pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        assert_eq!(empirical_quantile(&v, 1.0), 5.0);
        assert_eq!(empirical_quantile(&v, 0.5), 3.0);
        assert!((empirical_quantile(&v, 0.9) - 4.6).abs() < 1e-12);
    }
}
