use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible tail-index range for maximum likelihood (regular asymptotics
/// need `ξ > -1/2`).
pub const XI_BOUNDS: (f64, f64) = (-0.5, 2.0);
const MIN_EXCESSES: usize = 30;
const MIN_POOLED: usize = 100;
const XI_SERIES: f64 = 1e-6;

/// Survival function `(1 + ξ x / σ)_+^{-1/ξ}` (`exp(-x/σ)` at `ξ = 0`).
pub fn gpd_survival(x: f64, sigma: f64, xi: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "GPD scale {sigma} must be positive"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "GPD argument {x} must be nonnegative"
        )));
    }
    if xi == 0.0 {
        return Ok((-x / sigma).exp());
    }
    let t = 1.0 + xi * x / sigma;
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok((-(xi * x / sigma).ln_1p() / xi).exp())
}

/// Quantile `F^{-1}(p)` of the GPD distribution function.
pub fn gpd_quantile(p: f64, sigma: f64, xi: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "GPD scale {sigma} must be positive"
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1)"
        )));
    }
    let l = (-p).ln_1p();
    if xi == 0.0 {
        Ok(-sigma * l)
    } else {
        Ok(sigma * (-xi * l).exp_m1() / xi)
    }
}

/// Log-likelihood of excesses; `-∞` outside the support.
pub fn gpd_log_likelihood(excesses: &[f64], sigma: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = excesses.len() as f64;
    let mut s = 0.0;
    for &x in excesses {
        let y = x / sigma;
        if xi == 0.0 {
            s += y;
            continue;
        }
        let t = xi * y;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let l = t.ln_1p();
        s += l + l / xi;
    }
    -n * sigma.ln() - s
}

/// Sum of per-station log-likelihoods with a shared scale and tail index.
pub fn pooled_log_likelihood(excess_sets: &[Vec<f64>], sigma: f64, xi: f64) -> f64 {
    excess_sets
        .iter()
        .map(|e| gpd_log_likelihood(e, sigma, xi))
        .sum()
}

/// Log-likelihood, gradient and Hessian in `(ln σ, ξ)`.
fn derivatives(excesses: &[f64], eta: f64, xi: f64) -> Option<(f64, Vector2<f64>, Matrix2<f64>)> {
    let sigma = eta.exp();
    let ll = gpd_log_likelihood(excesses, sigma, xi);
    if !ll.is_finite() {
        return None;
    }
    let mut g = Vector2::zeros();
    let mut h = Matrix2::zeros();
    for &x in excesses {
        let y = x / sigma;
        let t = 1.0 + xi * y;
        let yt = y / t;
        g[0] += -1.0 + (xi + 1.0) * yt;
        h[(0, 0)] += -(xi + 1.0) * y / (t * t);
        h[(0, 1)] += y * (1.0 - y) / (t * t);
        if xi.abs() < XI_SERIES {
            g[1] += 0.5 * y * y - y + xi * (y * y - 2.0 * y * y * y / 3.0);
            h[(1, 1)] += y * y - 2.0 * y * y * y / 3.0;
        } else {
            let lt = (xi * y).ln_1p();
            g[1] += lt / (xi * xi) - (1.0 + 1.0 / xi) * yt;
            h[(1, 1)] +=
                -2.0 * lt / (xi * xi * xi) + 2.0 * yt / (xi * xi) + (1.0 / xi + 1.0) * yt * yt;
        }
    }
    h[(1, 0)] = h[(0, 1)];
    Some((ll, g, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub sigma: f64,
    pub xi: f64,
    /// Standard errors of `(σ, ξ)` from the inverse observed information.
    pub standard_errors: [f64; 2],
    pub n_exceedances: usize,
    pub threshold: f64,
    pub log_likelihood: f64,
    /// `ξ̂` within `1e-6` of an end of [`XI_BOUNDS`].
    pub at_bound: bool,
}

struct Optimum {
    eta: f64,
    xi: f64,
    ll: f64,
    hess: Matrix2<f64>,
}

fn newton(excesses: &[f64], eta0: f64, xi0: f64) -> Option<Optimum> {
    let (lo, hi) = XI_BOUNDS;
    let (mut eta, mut xi) = (eta0, xi0);
    let (mut ll, mut g, mut h) = derivatives(excesses, eta, xi)?;
    let scale = 1.0 + ll.abs();
    for _ in 0..500 {
        let neg = -h;
        let step = match neg.cholesky() {
            Some(c) => c.solve(&g),
            // not locally concave: scaled gradient ascent
            None => g / (1.0 + g.norm()) * 0.1,
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let e = eta + t * step[0];
            let x = (xi + t * step[1]).clamp(lo, hi);
            if let Some((l, g2, h2)) = derivatives(excesses, e, x) {
                if l >= ll - 1e-12 * scale {
                    let change = (e - eta).abs() + (x - xi).abs();
                    eta = e;
                    xi = x;
                    ll = l;
                    g = g2;
                    h = h2;
                    moved = change > 0.0;
                    break;
                }
            }
            t *= 0.5;
        }
        let grad_small = g.norm() < 1e-9 * scale;
        let at_edge = (xi - lo).abs() < 1e-12 || (xi - hi).abs() < 1e-12;
        if grad_small || !moved || (at_edge && g[0].abs() < 1e-9 * scale) {
            return Some(Optimum {
                eta,
                xi,
                ll,
                hess: h,
            });
        }
    }
    if g.norm() < 1e-6 * scale {
        Some(Optimum {
            eta,
            xi,
            ll,
            hess: h,
        })
    } else {
        None
    }
}

fn check_excesses(excesses: &[f64], min: usize) -> Result<()> {
    if excesses.len() < min {
        return Err(Error::InsufficientData(format!(
            "{} excesses, need at least {min}",
            excesses.len()
        )));
    }
    if excesses.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "excesses must be finite and nonnegative".into(),
        ));
    }
    let first = excesses[0];
    if excesses.iter().all(|x| *x == first) {
        return Err(Error::DegenerateSample("all excesses are equal".into()));
    }
    Ok(())
}

/// Maximum likelihood over the concatenated sample, from a moment start and
/// a few fixed restarts.
fn fit_core(excesses: &[f64]) -> Result<(Optimum, f64)> {
    let n = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / n;
    let var = excesses.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let max = excesses.iter().copied().fold(0.0, f64::max);
    let xi_mom = (0.5 * (1.0 - mean * mean / var)).clamp(-0.45, 1.5);
    let sigma_mom = 0.5 * mean * (mean * mean / var + 1.0);
    let mut starts = vec![(sigma_mom, xi_mom)];
    for xi in [0.1f64, 0.5, -0.2, 1.0] {
        starts.push((mean * (1.0 - xi).max(0.2), xi));
    }
    let mut best: Option<Optimum> = None;
    let mut tried = Vec::new();
    for (s0, x0) in starts {
        // keep the start inside the support
        let s0 = if x0 < 0.0 {
            s0.max(-x0 * max * 1.05)
        } else {
            s0
        };
        match newton(excesses, s0.ln(), x0) {
            Some(o) => {
                if best.as_ref().is_none_or(|b| o.ll > b.ll) {
                    best = Some(o);
                }
            }
            None => tried.push(format!("start (σ={s0:.4}, ξ={x0:.3})")),
        }
    }
    best.map(|o| (o, max)).ok_or_else(|| {
        Error::NonConvergence(format!(
            "GPD likelihood maximization failed from all starts: {}; n = {}, mean = {mean:.4}, max = {max:.4}",
            tried.join(", "),
            excesses.len()
        ))
    })
}

fn to_fit(o: Optimum, n: usize, threshold: f64) -> GpdFit {
    let sigma = o.eta.exp();
    let info = -o.hess;
    let (se_eta, se_xi) = match info.try_inverse() {
        Some(cov) if cov[(0, 0)] >= 0.0 && cov[(1, 1)] >= 0.0 => {
            (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt())
        }
        _ => (f64::NAN, f64::NAN),
    };
    let at_bound = (o.xi - XI_BOUNDS.0).abs() < 1e-6 || (o.xi - XI_BOUNDS.1).abs() < 1e-6;
    if at_bound {
        log::warn!(
            "GPD tail index estimate {:.4} sits at the admissible bound",
            o.xi
        );
    }
    GpdFit {
        sigma,
        xi: o.xi,
        standard_errors: [sigma * se_eta, se_xi],
        n_exceedances: n,
        threshold,
        log_likelihood: o.ll,
        at_bound,
    }
}

/// Maximum likelihood GPD fit to excesses over a threshold of zero.
pub fn gpd_fit_mle(excesses: &[f64]) -> Result<GpdFit> {
    check_excesses(excesses, MIN_EXCESSES)?;
    let (o, _) = fit_core(excesses)?;
    Ok(to_fit(o, excesses.len(), 0.0))
}

/// Common scale `a` and tail index `ξ` fitted by the independence likelihood
/// over all stations.
///
/// Standard errors come from the inverse Hessian of the independence
/// likelihood and ignore temporal and spatial dependence between excesses, so
/// they are optimistic for clustered data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    pub a: f64,
    pub xi: f64,
    pub standard_errors: [f64; 2],
    pub n_stations: usize,
    pub n_exceedances: usize,
    pub log_likelihood: f64,
    pub at_bound: bool,
}

pub fn fit_scale_shape_pooled(excess_sets: &[Vec<f64>]) -> Result<PooledFit> {
    let all: Vec<f64> = excess_sets.iter().flatten().copied().collect();
    check_excesses(&all, MIN_POOLED)?;
    let (o, _) = fit_core(&all)?;
    let fit = to_fit(o, all.len(), 0.0);
    Ok(PooledFit {
        a: fit.sigma,
        xi: fit.xi,
        standard_errors: fit.standard_errors,
        n_stations: excess_sets.iter().filter(|s| !s.is_empty()).count(),
        n_exceedances: all.len(),
        log_likelihood: pooled_log_likelihood(excess_sets, fit.sigma, fit.xi),
        at_bound: fit.at_bound,
    })
}
