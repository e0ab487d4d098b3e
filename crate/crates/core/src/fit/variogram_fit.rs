use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variogram::{VariogramFamily, VariogramModel};

use super::extremogram::EmpiricalExtremogram;
use super::optim::nelder_mead;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFitOptions {
    pub family: VariogramFamily,
    /// Fit `(κ, δ)` as well (planar data only).
    pub anisotropy: bool,
    pub multistarts: usize,
    pub max_iters: u64,
}

impl VariogramFitOptions {
    pub fn new(family: VariogramFamily) -> Self {
        Self {
            family,
            anisotropy: false,
            multistarts: 20,
            max_iters: 4000,
        }
    }

    pub fn anisotropic(mut self) -> Self {
        self.anisotropy = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Weighted residual sum of squares at the optimum.
    pub objective: f64,
    pub n_bins: usize,
    /// Some parameter ended at (or numerically near) the edge of its range.
    pub at_bound: bool,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained parameter vector ↔ model.
struct Param {
    family: VariogramFamily,
    anisotropy: bool,
}

impl Param {
    fn decode(&self, th: &[f64]) -> Option<VariogramModel> {
        let alpha = 2.0 * logistic(th[0]);
        let lambda = th[1].exp();
        let base = match self.family {
            VariogramFamily::PowerLaw => VariogramModel::power_law(alpha, lambda),
            VariogramFamily::BoundedExponential => {
                VariogramModel::bounded_exponential(th[2].exp(), alpha, lambda)
            }
            VariogramFamily::StableFractal => {
                VariogramModel::stable_fractal(alpha, 2.0 - th[2].exp(), lambda)
            }
        }
        .ok()?;
        if self.anisotropy {
            let k = th.len() - 2;
            base.with_anisotropy(th[k].exp(), FRAC_PI_4 * logistic(th[k + 1]))
                .ok()
        } else {
            Some(base)
        }
    }

    fn encode(&self, alpha: f64, lambda: f64, extra: f64, kappa: f64, delta: f64) -> Vec<f64> {
        let mut th = vec![logit(alpha / 2.0), lambda.ln()];
        match self.family {
            VariogramFamily::PowerLaw => {}
            VariogramFamily::BoundedExponential => th.push(extra.ln()),
            VariogramFamily::StableFractal => th.push((2.0 - extra).ln()),
        }
        if self.anisotropy {
            th.push(kappa.ln());
            th.push(logit(delta / FRAC_PI_4));
        }
        th
    }
}

/// Weighted least squares fit of a parametric variogram, through the
/// closed-form extremogram, to an empirical extremogram.
///
/// Bins are weighted by their pair counts; the optimizer is Nelder–Mead from
/// a lattice of starting values.
pub fn fit_variogram_to_extremogram(
    emp: &EmpiricalExtremogram,
    opts: &VariogramFitOptions,
) -> Result<VariogramFit> {
    let bins: Vec<_> = emp.reliable_bins().collect();
    if bins.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} reliable extremogram bins, need at least 4",
            bins.len()
        )));
    }
    let anisotropy = opts.anisotropy && emp.dim == 2;
    let param = Param {
        family: opts.family,
        anisotropy,
    };
    let total: f64 = bins.iter().map(|b| b.pairs as f64).sum();
    let data: Vec<(Vec<f64>, f64, f64)> = bins
        .iter()
        .map(|b| (b.lag_vector(emp.dim), b.rho, b.pairs as f64 / total))
        .collect();
    let objective = |th: &[f64]| -> f64 {
        match param.decode(th) {
            Some(m) => data
                .iter()
                .map(|(h, rho, w)| w * (m.extremogram(h) - rho).powi(2))
                .sum(),
            None => f64::INFINITY,
        }
    };

    let mean_lag = bins.iter().map(|b| b.lag * b.pairs as f64).sum::<f64>() / total;
    let min_lag = bins.iter().map(|b| b.lag).fold(f64::INFINITY, f64::min);
    let max_lag = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    let min_rho = bins.iter().map(|b| b.rho).fold(1.0, f64::min).max(1e-3);
    let sill0 = (1.2 * crate::variogram::variogram_from_extremogram(min_rho)?).max(0.1);
    let extra0 = match opts.family {
        VariogramFamily::BoundedExponential => sill0,
        _ => 1.0,
    };
    let mut starts = Vec::new();
    'lattice: for &lf in &[1.0, 0.5, 2.0, 0.25, 4.0] {
        for &alpha in &[1.0, 1.5, 0.5, 1.9] {
            if starts.len() >= opts.multistarts.max(1) {
                break 'lattice;
            }
            starts.push(param.encode(alpha, lf * mean_lag, extra0, 1.0, FRAC_PI_4 / 2.0));
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in &starts {
        let first = nelder_mead(&objective, x0, 0.5, opts.max_iters, 1e-16)?;
        // restart from the incumbent to escape a collapsed simplex
        let second = nelder_mead(&objective, &first.x, 0.1, opts.max_iters, 1e-18)?;
        let cand = if second.value <= first.value {
            (second.x, second.value)
        } else {
            (first.x, first.value)
        };
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let (th, value) = best.expect("at least one start");
    let model = param.decode(&th).ok_or_else(|| {
        Error::NonConvergence("variogram fit ended outside the parameter space".into())
    })?;

    let mut at_bound = model.alpha > 1.995 || model.alpha < 0.01;
    at_bound |= model.lambda > 1e3 * max_lag || model.lambda < 1e-3 * min_lag;
    if let Some(b) = model.beta {
        at_bound |= b < -50.0;
    }
    if let Some(s) = model.sigma {
        at_bound |= s > 1e3;
    }
    if anisotropy {
        let a = model.anisotropy;
        at_bound |= !(1e-3..=1e3).contains(&a.kappa);
    }
    if at_bound {
        log::warn!("variogram fit reached a parameter bound: {model:?}");
    }
    Ok(VariogramFit {
        model,
        objective: value,
        n_bins: bins.len(),
        at_bound,
    })
}
