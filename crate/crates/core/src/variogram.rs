//! Parametric semi-variograms with planar geometric anisotropy, and the
//! closed-form link between a semi-variogram value and pairwise extremal
//! dependence of log-Gaussian Pareto processes.

use std::f64::consts::{FRAC_PI_4, LN_2};

use libm::erfc;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::domain::SpatialGrid;
use crate::error::{Error, Result};

/// Geometric anisotropy `A = [[cos δ, -sin δ], [κ sin δ, κ cos δ]]`.
///
/// `δ = 0` is accepted as the explicit isotropic-rotation value; otherwise
/// `δ` must lie in the open interval `(0, π/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyParams {
    pub kappa: f64,
    pub delta: f64,
}

impl Default for AnisotropyParams {
    fn default() -> Self {
        Self::ISOTROPIC
    }
}

impl AnisotropyParams {
    pub const ISOTROPIC: AnisotropyParams = AnisotropyParams {
        kappa: 1.0,
        delta: 0.0,
    };

    pub fn new(kappa: f64, delta: f64) -> Result<Self> {
        let a = Self { kappa, delta };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa {} must be positive",
                self.kappa
            )));
        }
        if !(self.delta == 0.0 || (self.delta > 0.0 && self.delta < FRAC_PI_4)) {
            return Err(Error::InvalidParameter(format!(
                "delta {} must be 0 or lie in (0, pi/4)",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.kappa == 1.0
    }
}

/// Applies the anisotropy matrix to a planar lag. Lags in any other
/// dimension are returned unchanged.
pub fn anisotropy_transform(a: &AnisotropyParams, h: &[f64]) -> Vec<f64> {
    if h.len() != 2 {
        return h.to_vec();
    }
    let (s, c) = a.delta.sin_cos();
    vec![c * h[0] - s * h[1], a.kappa * (s * h[0] + c * h[1])]
}

fn transformed_norm(a: &AnisotropyParams, h: &[f64]) -> f64 {
    if h.len() == 2 {
        let (s, c) = a.delta.sin_cos();
        let u = c * h[0] - s * h[1];
        let v = a.kappa * (s * h[0] + c * h[1]);
        u.hypot(v)
    } else {
        h.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariogramFamily {
    /// `{(1 + x^α)^{β/α} - 1} / (2^{β/α} - 1)`, bounded iff `β < 0`.
    StableFractal,
    /// `x^α`.
    PowerLaw,
    /// `σ {1 - exp(-x^α)}`.
    BoundedExponential,
}

impl std::str::FromStr for VariogramFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable-fractal" => Ok(Self::StableFractal),
            "power-law" => Ok(Self::PowerLaw),
            "bounded-exponential" => Ok(Self::BoundedExponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown variogram family {other:?}"
            ))),
        }
    }
}

/// Semi-variogram `γ(h) = f(‖A h‖ / λ)` for one of the supported families.
///
/// `γ` is half the variance of Gaussian increments, so that the conditional
/// covariance used for simulation is `Γ_i1 + Γ_j1 - Γ_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub family: VariogramFamily,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(flatten)]
    pub anisotropy: AnisotropyParams,
}

impl VariogramModel {
    pub fn stable_fractal(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        Self {
            family: VariogramFamily::StableFractal,
            alpha,
            beta: Some(beta),
            lambda,
            sigma: None,
            anisotropy: AnisotropyParams::ISOTROPIC,
        }
        .validated()
    }

    pub fn power_law(alpha: f64, lambda: f64) -> Result<Self> {
        Self {
            family: VariogramFamily::PowerLaw,
            alpha,
            beta: None,
            lambda,
            sigma: None,
            anisotropy: AnisotropyParams::ISOTROPIC,
        }
        .validated()
    }

    pub fn bounded_exponential(sigma: f64, alpha: f64, lambda: f64) -> Result<Self> {
        Self {
            family: VariogramFamily::BoundedExponential,
            alpha,
            beta: None,
            lambda,
            sigma: Some(sigma),
            anisotropy: AnisotropyParams::ISOTROPIC,
        }
        .validated()
    }

    pub fn with_anisotropy(mut self, kappa: f64, delta: f64) -> Result<Self> {
        self.anisotropy = AnisotropyParams::new(kappa, delta)?;
        Ok(self)
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha {} must lie in (0, 2]",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda {} must be positive",
                self.lambda
            )));
        }
        match self.family {
            VariogramFamily::StableFractal => match self.beta {
                Some(b) if b < 2.0 && b.is_finite() => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "stable-fractal needs beta < 2, got {other:?}"
                    )))
                }
            },
            VariogramFamily::BoundedExponential => match self.sigma {
                Some(s) if s > 0.0 && s.is_finite() => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "bounded-exponential needs sigma > 0, got {other:?}"
                    )))
                }
            },
            VariogramFamily::PowerLaw => {}
        }
        self.anisotropy.validate()
    }

    /// `γ` as a function of the scaled distance `x = ‖A h‖ / λ`.
    pub fn profile(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let xa = x.powf(self.alpha);
        match self.family {
            VariogramFamily::PowerLaw => xa,
            VariogramFamily::BoundedExponential => self.sigma.unwrap_or(1.0) * (-(-xa).exp_m1()),
            VariogramFamily::StableFractal => {
                let r = self.beta.unwrap_or(1.0) / self.alpha;
                if r.abs() < 1e-12 {
                    xa.ln_1p() / LN_2
                } else {
                    (r * xa.ln_1p()).exp_m1() / (r * LN_2).exp_m1()
                }
            }
        }
    }

    /// Semi-variogram at lag vector `h`.
    pub fn eval(&self, h: &[f64]) -> f64 {
        self.profile(transformed_norm(&self.anisotropy, h) / self.lambda)
    }

    /// Supremum of `γ` over all lags, infinite for unbounded models.
    pub fn sill(&self) -> f64 {
        match self.family {
            VariogramFamily::PowerLaw => f64::INFINITY,
            VariogramFamily::BoundedExponential => self.sigma.unwrap_or(1.0),
            VariogramFamily::StableFractal => {
                let b = self.beta.unwrap_or(1.0);
                if b < 0.0 {
                    1.0 / (1.0 - (b / self.alpha * LN_2).exp())
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Pairwise extremogram implied by the model at lag `h`.
    pub fn extremogram(&self, h: &[f64]) -> f64 {
        rho_of_gamma(self.eval(h))
    }
}

pub fn variogram_eval(m: &VariogramModel, h: &[f64]) -> f64 {
    m.eval(h)
}

fn rho_of_gamma(gamma: f64) -> f64 {
    // 2 {1 - Φ(√(γ/2))} = erfc(√γ / 2)
    erfc(gamma.sqrt() / 2.0)
}

/// `ρ = 2 {1 - Φ(√(γ/2))}`.
pub fn extremogram_from_variogram(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "semi-variogram value {gamma} must be nonnegative"
        )));
    }
    Ok(rho_of_gamma(gamma))
}

/// Inverse of [`extremogram_from_variogram`]: `γ = 2 {Φ⁻¹(1 - ρ/2)}²`.
pub fn variogram_from_extremogram(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "extremogram value {rho} must lie in (0, 1]"
        )));
    }
    if rho == 1.0 {
        return Ok(0.0);
    }
    // Newton polish so that the inverse matches `erfc` to rounding
    let mut z = erfc_inv(rho);
    for _ in 0..3 {
        let slope = -std::f64::consts::FRAC_2_SQRT_PI * (-z * z).exp();
        let step = (erfc(z) - rho) / slope;
        z -= step;
        if step.abs() <= 1e-16 * z.abs() {
            break;
        }
    }
    Ok(4.0 * z * z)
}

/// `Γ_ij = γ(s_i - s_j)`.
pub fn variogram_matrix(m: &VariogramModel, grid: &SpatialGrid) -> DMatrix<f64> {
    let n = grid.len();
    let mut gamma = DMatrix::zeros(n, n);
    let mut lag = vec![0.0; grid.dim()];
    for i in 0..n {
        let si = grid.coords(i);
        for j in 0..i {
            for (d, (a, b)) in lag.iter_mut().zip(si.iter().zip(grid.coords(j))) {
                *d = a - b;
            }
            let g = m.eval(&lag);
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
        }
    }
    gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use proptest::prelude::*;

    // Independent Φ via the Taylor series of erf (converges for all x, used
    // here only for moderate arguments).
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / PI.sqrt() * sum
    }

    fn phi_oracle(z: f64) -> f64 {
        0.5 * (1.0 + erf_series(z / 2f64.sqrt()))
    }

    #[test]
    fn anisotropy_examples() {
        let iso = AnisotropyParams::new(1.0, 0.0).unwrap();
        assert_eq!(anisotropy_transform(&iso, &[1.0, 0.0]), vec![1.0, 0.0]);
        let stretch = AnisotropyParams::new(2.0, 0.0).unwrap();
        assert_eq!(anisotropy_transform(&stretch, &[0.0, 1.0]), vec![0.0, 2.0]);
        let rot = AnisotropyParams::new(1.0, PI / 6.0).unwrap();
        let v = anisotropy_transform(&rot, &[1.0, 0.0]);
        // direct matrix evaluation
        let expected = [(PI / 6.0).cos(), 1.0 * (PI / 6.0).sin()];
        assert!((v[0] - expected[0]).abs() < 1e-15 && (v[1] - expected[1]).abs() < 1e-15);
        assert!((v[0] - 0.8660).abs() < 1e-4 && (v[1] - 0.5).abs() < 1e-12);
        assert_eq!(anisotropy_transform(&rot, &[3.0]), vec![3.0]);
    }

    #[test]
    fn anisotropy_rejects_bad_parameters() {
        assert!(AnisotropyParams::new(0.0, 0.1).is_err());
        assert!(AnisotropyParams::new(1.0, PI / 4.0).is_err());
        assert!(AnisotropyParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn variogram_examples() {
        let sf = VariogramModel::stable_fractal(1.2, 0.5, 3.0).unwrap();
        let pl = VariogramModel::power_law(1.5, 2.5).unwrap();
        let be = VariogramModel::bounded_exponential(2.0, 1.5, 10.0).unwrap();
        for m in [sf, pl, be] {
            assert_eq!(m.eval(&[0.0, 0.0]), 0.0);
        }
        assert!((sf.eval(&[3.0, 0.0]) - 1.0).abs() < 1e-14);
        assert!((sf.eval(&[0.0, -3.0]) - 1.0).abs() < 1e-14);
        assert!((pl.eval(&[2.5]) - 1.0).abs() < 1e-15);
        // β → 0 limit is continuous
        let near0 = VariogramModel::stable_fractal(1.0, 1e-13, 1.0).unwrap();
        let log_form = VariogramModel::stable_fractal(1.0, 0.0, 1.0).unwrap();
        assert!((near0.eval(&[2.0]) - log_form.eval(&[2.0])).abs() < 1e-9);
        assert!((log_form.eval(&[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(VariogramModel::power_law(2.5, 1.0).is_err());
        assert!(VariogramModel::power_law(1.0, 0.0).is_err());
        assert!(VariogramModel::stable_fractal(1.0, 2.0, 1.0).is_err());
        assert!(VariogramModel::bounded_exponential(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn extremogram_examples() {
        assert_eq!(extremogram_from_variogram(0.0).unwrap(), 1.0);
        assert!(extremogram_from_variogram(1e6).unwrap() < 1e-100);
        let oracle = 2.0 * (1.0 - phi_oracle(1.0));
        let rho = extremogram_from_variogram(2.0).unwrap();
        assert!((rho - oracle).abs() < 1e-13);
        assert!((rho - 0.31731).abs() < 1e-5);
        assert!(extremogram_from_variogram(-0.1).is_err());
    }

    #[test]
    fn inverse_extremogram_examples() {
        assert_eq!(variogram_from_extremogram(1.0).unwrap(), 0.0);
        let oracle_rho = 2.0 * (1.0 - phi_oracle(1.0));
        assert!((variogram_from_extremogram(oracle_rho).unwrap() - 2.0).abs() < 1e-10);
        assert!((variogram_from_extremogram(0.31731).unwrap() - 2.0).abs() < 1e-3);
        for g in [0.1, 1.0, 5.0] {
            let back = variogram_from_extremogram(extremogram_from_variogram(g).unwrap()).unwrap();
            assert!((back - g).abs() < 1e-10, "{g} -> {back}");
        }
        assert!(variogram_from_extremogram(0.0).is_err());
        assert!(variogram_from_extremogram(1.5).is_err());
    }

    #[test]
    fn variogram_matrix_examples() {
        let m = VariogramModel::stable_fractal(1.0, 1.0, 2.0).unwrap();
        let one = SpatialGrid::regular_1d(0.0, 0.0, 1.0).unwrap();
        assert_eq!(variogram_matrix(&m, &one), DMatrix::zeros(1, 1));
        let two = SpatialGrid::regular_1d(0.0, 2.0, 2.0).unwrap();
        let g = variogram_matrix(&m, &two);
        assert!((g[(0, 1)] - 1.0).abs() < 1e-14 && (g[(1, 0)] - 1.0).abs() < 1e-14);

        let pl = VariogramModel::power_law(1.3, 0.7).unwrap();
        let three = SpatialGrid::regular_1d(0.0, 1.0, 0.5).unwrap();
        let g = variogram_matrix(&pl, &three);
        for i in 0..3 {
            for j in 0..3 {
                let h = (i as f64 - j as f64).abs() * 0.5;
                let expected = if h == 0.0 { 0.0 } else { (h / 0.7).powf(1.3) };
                assert!((g[(i, j)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn json_schema_is_flat() {
        let m = VariogramModel::stable_fractal(1.5, -0.5, 10.0)
            .unwrap()
            .with_anisotropy(1.3, 0.2)
            .unwrap();
        let v: serde_json::Value = serde_json::to_value(m).unwrap();
        for key in ["family", "alpha", "beta", "lambda", "kappa", "delta"] {
            assert!(v.get(key).is_some(), "{key} missing in {v}");
        }
        assert!(v.get("sigma").is_none());
        assert_eq!(v["family"], "stable-fractal");
        let back: VariogramModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bounded_stable_fractal_respects_sill() {
        let m = VariogramModel::stable_fractal(1.2, -0.8, 1.0).unwrap();
        let bound = 1.0 / (1.0 - 2f64.powf(-0.8 / 1.2));
        assert!((m.sill() - bound).abs() < 1e-14);
        for k in -40..=60 {
            let h = 10f64.powf(k as f64 / 10.0);
            assert!(m.eval(&[h]) <= bound + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn negated_lag_same_value(
            family in 0usize..3, alpha in 0.1f64..2.0, lambda in 0.1f64..20.0,
            kappa in 0.2f64..5.0, delta in 0.0f64..0.78, hx in -30.0f64..30.0, hy in -30.0f64..30.0,
        ) {
            let base = match family {
                0 => VariogramModel::stable_fractal(alpha, 0.7, lambda),
                1 => VariogramModel::power_law(alpha, lambda),
                _ => VariogramModel::bounded_exponential(2.0, alpha, lambda),
            }.unwrap().with_anisotropy(kappa, delta).unwrap();
            let a = base.eval(&[hx, hy]);
            let b = base.eval(&[-hx, -hy]);
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn nondecreasing_along_a_direction(
            family in 0usize..3, alpha in 0.1f64..2.0, lambda in 0.1f64..20.0,
            beta in -3.0f64..1.9, angle in 0.0f64..std::f64::consts::TAU, t in 0.0f64..50.0, dt in 0.0f64..5.0,
        ) {
            let m = match family {
                0 => VariogramModel::stable_fractal(alpha, beta, lambda),
                1 => VariogramModel::power_law(alpha, lambda),
                _ => VariogramModel::bounded_exponential(2.0, alpha, lambda),
            }.unwrap().with_anisotropy(1.7, 0.3).unwrap();
            let (s, c) = angle.sin_cos();
            let g1 = m.eval(&[t * c, t * s]);
            let g2 = m.eval(&[(t + dt) * c, (t + dt) * s]);
            prop_assert!(g2 >= g1 - 1e-12 * (1.0 + g1));
        }

        #[test]
        fn extremogram_round_trip(rho in 0.001f64..=1.0) {
            let g = variogram_from_extremogram(rho).unwrap();
            let back = extremogram_from_variogram(g).unwrap();
            prop_assert!((back - rho).abs() < 1e-10);
        }

        #[test]
        fn extremogram_strictly_decreasing(g in 0.0f64..50.0, dg in 1e-3f64..5.0) {
            let a = extremogram_from_variogram(g).unwrap();
            let b = extremogram_from_variogram(g + dg).unwrap();
            prop_assert!(b < a);
        }
    }
}
