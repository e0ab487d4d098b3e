use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Location function `b(s) = b1 + b2 y(s)` fitted by ordinary least squares
/// of per-station quantiles on a covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModelFit {
    pub b1: f64,
    pub b2: f64,
    pub standard_errors: [f64; 2],
    pub covariate_name: String,
    pub n_stations: usize,
    pub residual_sd: f64,
}

impl LocationModelFit {
    pub fn predict(&self, covariate: f64) -> f64 {
        self.b1 + self.b2 * covariate
    }
}

pub fn fit_location_covariate(
    station_quantiles: &[f64],
    covariate: &[f64],
    covariate_name: &str,
) -> Result<LocationModelFit> {
    let n = station_quantiles.len();
    if covariate.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{n} quantiles for {} covariate values",
            covariate.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} stations, need at least 3"
        )));
    }
    if station_quantiles
        .iter()
        .chain(covariate)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidParameter(
            "non-finite regression input".into(),
        ));
    }
    let nf = n as f64;
    let xbar = covariate.iter().sum::<f64>() / nf;
    let ybar = station_quantiles.iter().sum::<f64>() / nf;
    let sxx: f64 = covariate.iter().map(|x| (x - xbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::ZeroVarianceCovariate);
    }
    let sxy: f64 = covariate
        .iter()
        .zip(station_quantiles)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let b2 = sxy / sxx;
    let b1 = ybar - b2 * xbar;
    let rss: f64 = covariate
        .iter()
        .zip(station_quantiles)
        .map(|(x, y)| (y - b1 - b2 * x).powi(2))
        .sum();
    let s = (rss / (nf - 2.0)).sqrt();
    Ok(LocationModelFit {
        b1,
        b2,
        standard_errors: [s * (1.0 / nf + xbar * xbar / sxx).sqrt(), s / sxx.sqrt()],
        covariate_name: covariate_name.to_string(),
        n_stations: n,
        residual_sd: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Seed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_line() {
        let x = [0.1, 0.5, 0.9, 1.3, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = fit_location_covariate(&y, &x, "mean").unwrap();
        assert!((fit.b1 - 2.0).abs() < 1e-10 && (fit.b2 - 3.0).abs() < 1e-10);
        assert!(fit.standard_errors.iter().all(|s| *s < 1e-10));
    }

    #[test]
    fn noisy_fourteen_stations() {
        let mut rng = Seed(21).stream(0);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let x: Vec<f64> = (0..14).map(|i| 0.05 + 0.01 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 1.14 + 20.8 * v + noise.sample(&mut rng))
            .collect();
        let fit = fit_location_covariate(&y, &x, "mean").unwrap();
        assert!((fit.b1 - 1.14).abs() < 3.0 * fit.standard_errors[0]);
        assert!((fit.b2 - 20.8).abs() < 3.0 * fit.standard_errors[1]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            fit_location_covariate(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], "c"),
            Err(Error::ZeroVarianceCovariate)
        ));
        assert!(matches!(
            fit_location_covariate(&[1.0, 2.0], &[1.0, 2.0], "c"),
            Err(Error::InsufficientData(_))
        ));
    }
}
