//! Station network workflow: marginal and dependence fit from gauge series
//! and a raster stack, then a sequential design on the fitted model.

use serde::{Deserialize, Serialize};

use crate::design::{forward_backward_refine, sequential_design, DesignProblem, DesignState};
use crate::domain::{Location, RiskFunctional, SpatialGrid, StationSeries};
use crate::error::{Error, Result};
use crate::fit::{
    empirical_extremogram, empirical_quantile, fit_location_covariate, fit_scale_shape_pooled,
    fit_variogram_to_extremogram, qq_plot_data, EmpiricalExtremogram, ExtremogramConfig, GpdFit,
    LocationModelFit, PooledFit, QqPoint, VariogramFit, VariogramFitOptions,
};
use crate::io::RasterStack;
use crate::simulate::{simulate_r_pareto, MarginalModel, ParetoSpec, Seed};
use crate::variogram::{VariogramFamily, VariogramModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Quantile level for the gauge thresholds and the extremogram.
    pub q: f64,
    pub family: VariogramFamily,
    pub anisotropy: bool,
    /// Gauges with fewer non-missing values are skipped.
    pub min_observations: usize,
    pub bin_width: Option<f64>,
    pub max_lag: Option<f64>,
    pub sectors: Option<usize>,
    pub qq_bootstrap: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            q: 0.995,
            family: VariogramFamily::StableFractal,
            anisotropy: true,
            min_observations: 1000,
            bin_width: None,
            max_lag: None,
            sectors: None,
            qq_bootstrap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSummary {
    pub name: String,
    pub coords: Vec<f64>,
    pub n_observations: usize,
    /// Empirical `q`-quantile of the record.
    pub quantile: Option<f64>,
    /// Raster mean at the nearest cell.
    pub covariate: f64,
    pub n_exceedances: usize,
    /// Reason the gauge was left out, if it was.
    pub skipped: Option<String>,
}

/// Everything the design step needs, in one serializable record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub grid: SpatialGrid,
    /// Raster time mean per cell.
    pub covariate: Vec<f64>,
    pub location: LocationModelFit,
    pub marginal: PooledFit,
    pub dependence: VariogramFit,
    pub stations: Vec<StationSummary>,
}

impl FittedModel {
    pub fn model(&self) -> VariogramModel {
        self.dependence.model
    }

    /// Location `b̂(s)` at a point, through the covariate of the nearest cell.
    pub fn location_at(&self, coords: &[f64]) -> f64 {
        self.location
            .predict(self.covariate[self.grid.nearest(coords)])
    }

    pub fn station_locations(&self) -> Vec<Location> {
        self.stations
            .iter()
            .filter(|s| s.skipped.is_none())
            .map(|s| Location::new(s.coords.clone()).expect("finite coordinates"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: FittedModel,
    pub extremogram: EmpiricalExtremogram,
    pub qq: Vec<QqPoint>,
}

/// Location regression on the raster mean, pooled GPD for `(a, ξ)` on the
/// excesses over `b̂`, and a variogram fitted to the raster extremogram.
pub fn fit_network(
    stations: &[StationSeries],
    radar: &RasterStack,
    cfg: &FitConfig,
    seed: Seed,
) -> Result<FitOutcome> {
    if !(cfg.q > 0.0 && cfg.q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level {} outside (0, 1)",
            cfg.q
        )));
    }
    let grid = radar.grid.clone();
    let covariate = radar.mean_field();

    let mut summaries = Vec::with_capacity(stations.len());
    let mut used = Vec::new();
    for st in stations {
        let obs = st.observed();
        let cell = grid.nearest(st.location.coords());
        let mut summary = StationSummary {
            name: st.name.clone(),
            coords: st.location.coords().to_vec(),
            n_observations: obs.len(),
            quantile: None,
            covariate: covariate[cell],
            n_exceedances: 0,
            skipped: None,
        };
        if obs.len() < cfg.min_observations {
            let msg = format!("{} observations, need {}", obs.len(), cfg.min_observations);
            log::warn!("skipping station {}: {msg}", st.name);
            summary.skipped = Some(msg);
        } else {
            summary.quantile = Some(empirical_quantile(&obs, cfg.q));
            used.push((summaries.len(), obs));
        }
        summaries.push(summary);
    }
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable stations, need at least 3",
            used.len()
        )));
    }
    let quantiles: Vec<f64> = used
        .iter()
        .map(|(k, _)| summaries[*k].quantile.unwrap())
        .collect();
    let covs: Vec<f64> = used.iter().map(|(k, _)| summaries[*k].covariate).collect();
    let location = fit_location_covariate(&quantiles, &covs, "raster-mean")?;

    let excesses: Vec<Vec<f64>> = used
        .iter()
        .map(|(k, obs)| {
            let b = location.predict(summaries[*k].covariate);
            obs.iter()
                .filter(|v| **v > b)
                .map(|v| v - b)
                .collect::<Vec<f64>>()
        })
        .collect();
    for ((k, _), e) in used.iter().zip(&excesses) {
        summaries[*k].n_exceedances = e.len();
    }
    let marginal = fit_scale_shape_pooled(&excesses)?;

    let ecfg = ExtremogramConfig {
        q: cfg.q,
        bin_width: cfg.bin_width,
        max_lag: cfg.max_lag,
        sectors: cfg.sectors,
        ..Default::default()
    };
    let extremogram = empirical_extremogram(&radar.fields, &grid, &ecfg)?;
    let mut vopts = VariogramFitOptions::new(cfg.family);
    vopts.anisotropy = cfg.anisotropy && grid.dim() == 2;
    let dependence = fit_variogram_to_extremogram(&extremogram, &vopts)?;

    let pooled_gpd = GpdFit {
        sigma: marginal.a,
        xi: marginal.xi,
        standard_errors: marginal.standard_errors,
        n_exceedances: marginal.n_exceedances,
        threshold: 0.0,
        log_likelihood: marginal.log_likelihood,
        at_bound: marginal.at_bound,
    };
    let all: Vec<f64> = excesses.concat();
    let qq = qq_plot_data(&pooled_gpd, &all, cfg.qq_bootstrap, seed)?;

    Ok(FitOutcome {
        model: FittedModel {
            grid,
            covariate,
            location,
            marginal,
            dependence,
            stations: summaries,
        },
        extremogram,
        qq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// Data-scale threshold `u` of the supremum functional.
    pub threshold: f64,
    pub l_samp: usize,
    /// Ensemble size.
    pub n: usize,
    /// Candidates may extend this far beyond the region (0 = inside only).
    pub extend_margin: f64,
    pub refine_sweeps: usize,
    pub max_attempts: u64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            threshold: 20.0,
            l_samp: 10,
            n: 10_000,
            extend_margin: 0.0,
            refine_sweeps: 0,
            max_attempts: crate::simulate::DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Cells of the design grid and their roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDomain {
    pub grid: SpatialGrid,
    /// Cells of the study region on which the reference probability is defined.
    pub region: Vec<bool>,
    pub eligible: Vec<bool>,
    /// Cells holding existing stations.
    pub observed: Vec<usize>,
}

/// Region cells (optionally widened by `margin`), followed by any station
/// location not already on them. Stations are never candidates.
pub fn design_domain(
    fitted: &SpatialGrid,
    region: Option<&[bool]>,
    stations: &[Location],
    margin: f64,
) -> Result<DesignDomain> {
    let cells: Vec<usize> = match region {
        Some(mask) => {
            if mask.len() != fitted.len() {
                return Err(Error::InvalidParameter(
                    "region mask does not match the fitted grid".into(),
                ));
            }
            (0..fitted.len()).filter(|&i| mask[i]).collect()
        }
        None => (0..fitted.len()).collect(),
    };
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty design region".into()));
    }
    let base = fitted.subgrid(&cells)?;
    let (grown, in_region) = base.extend_by_margin(margin)?;
    let n_candidates = grown.len();
    let mut locations = grown.locations().to_vec();
    let mut observed = Vec::new();
    let probe = SpatialGrid::new(locations.clone(), fitted.spacing())?;
    for loc in stations {
        let near = probe.nearest(loc.coords());
        if probe.location(near).distance(loc) <= 0.5 * fitted.spacing() + 1e-9 {
            if !observed.contains(&near) {
                observed.push(near);
            }
        } else if let Some(k) = locations[n_candidates..]
            .iter()
            .position(|l| l.distance(loc) < 1e-9)
        {
            if !observed.contains(&(n_candidates + k)) {
                observed.push(n_candidates + k);
            }
        } else {
            observed.push(locations.len());
            locations.push(loc.clone());
        }
    }
    let len = locations.len();
    let grid = SpatialGrid::new(locations, fitted.spacing())?;
    let mut region = in_region;
    region.resize(len, false);
    let mut eligible: Vec<bool> = (0..len).map(|i| i < n_candidates).collect();
    for &o in &observed {
        eligible[o] = false;
    }
    Ok(DesignDomain {
        grid,
        region,
        eligible,
        observed,
    })
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub domain: DesignDomain,
    pub state: DesignState,
    pub marginal: MarginalModel,
}

/// Sequential design for the supremum over the region on an ensemble drawn
/// from the fitted model, conditioned on an exceedance anywhere on the design
/// grid.
pub fn design_network(
    fitted: &FittedModel,
    domain: DesignDomain,
    cfg: &DesignConfig,
    seed: Seed,
) -> Result<DesignOutcome> {
    if cfg.l_samp == 0 {
        return Err(Error::InvalidParameter(
            "number of sites to add must be at least 1".into(),
        ));
    }
    let grid = &domain.grid;
    let b: Vec<f64> = (0..grid.len())
        .map(|i| fitted.location_at(grid.coords(i)))
        .collect();
    let a = vec![fitted.marginal.a; grid.len()];
    let marginal = MarginalModel::new(a, b, fitted.marginal.xi)?;
    let risk = RiskFunctional::Supremum;
    let mut spec = ParetoSpec::new(
        fitted.model(),
        marginal.clone(),
        risk.clone(),
        cfg.threshold,
    );
    spec.max_attempts = cfg.max_attempts;
    let ens = simulate_r_pareto(&spec, grid, cfg.n, seed)?;
    let data = ens.data_scale_with(&marginal);
    let problem = DesignProblem::new(&data, &risk, cfg.threshold)?
        .with_region(&data, &risk, domain.region.clone())?
        .with_candidates(domain.eligible.clone())?;
    let mut state = sequential_design(&problem, grid, cfg.l_samp, &domain.observed)?;
    if cfg.refine_sweeps > 0 && state.chosen.len() >= 2 {
        state = forward_backward_refine(state, &problem, grid, cfg.refine_sweeps)?;
    }
    Ok(DesignOutcome {
        domain,
        state,
        marginal,
    })
}
