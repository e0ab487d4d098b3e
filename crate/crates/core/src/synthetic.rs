//! Synthetic catchment with a known peaks-over-threshold model: a raster of
//! hourly fields and a set of rain gauges, both generated from the same
//! marginal and dependence model.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::domain::{Location, RiskFunctional, SpatialGrid, StationSeries};
use crate::error::{Error, Result};
use crate::fit::gpd_quantile;
use crate::io::{write_grid_table, write_json, write_raster_stack, write_station, RasterStack};
use crate::samples::SampleMatrix;
use crate::simulate::{simulate_r_pareto, MarginalModel, ParetoSpec, Seed};
use crate::variogram::VariogramModel;

/// Hours from 1970-01-01 to 2013-01-01.
const START_HOUR: i64 = 376_944;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinTruth {
    pub b1: f64,
    pub b2: f64,
    pub a: f64,
    pub xi: f64,
    pub model: VariogramModel,
}

impl Default for BasinTruth {
    fn default() -> Self {
        Self {
            b1: 1.14,
            b2: 20.8,
            a: 1.87,
            xi: 0.33,
            model: VariogramModel::stable_fractal(1.5, 0.8, 8.0)
                .and_then(|m| m.with_anisotropy(1.5, 0.5))
                .expect("valid parameters"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticBasinConfig {
    pub nx: usize,
    pub ny: usize,
    /// Cell size in km.
    pub spacing: f64,
    pub n_stations: usize,
    /// Stations placed inside the catchment; the rest lie around it.
    pub stations_inside: usize,
    /// Record lengths are drawn uniformly in this range (hours).
    pub min_hours: usize,
    pub max_hours: usize,
    /// Exceedance probability of the location `b(s)` at each gauge.
    pub tail_prob: f64,
    pub wet_prob: f64,
    pub missing_prob: f64,
    pub radar_frames: usize,
    /// Share of raster frames that carry an extreme event.
    pub event_fraction: f64,
    pub truth: BasinTruth,
    pub seed: u64,
}

impl Default for SyntheticBasinConfig {
    fn default() -> Self {
        Self {
            nx: 30,
            ny: 30,
            spacing: 1.0,
            n_stations: 14,
            stations_inside: 3,
            min_hours: 30_000,
            max_hours: 62_000,
            tail_prob: 0.005,
            wet_prob: 0.1,
            missing_prob: 0.01,
            radar_frames: 4000,
            event_fraction: 0.5,
            truth: BasinTruth::default(),
            seed: 2013,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBasin {
    pub config: SyntheticBasinConfig,
    pub grid: SpatialGrid,
    /// Mean hourly rainfall (mm/h) per cell; the raster's time mean.
    pub covariate: Vec<f64>,
    /// Catchment mask.
    pub basin: Vec<bool>,
    pub station_cells: Vec<usize>,
    pub stations: Vec<StationSeries>,
    pub radar: RasterStack,
}

impl SyntheticBasin {
    /// True location `b(s) = b1 + b2 y(s)` per cell.
    pub fn location_field(&self) -> Vec<f64> {
        let t = &self.config.truth;
        self.covariate.iter().map(|y| t.b1 + t.b2 * y).collect()
    }

    /// Writes `stations/*.csv`, `radar.bin` (+ sidecar), `basin.csv` and
    /// `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let st_dir = dir.join("stations");
        std::fs::create_dir_all(&st_dir).map_err(|e| Error::io(&st_dir, e))?;
        for s in &self.stations {
            write_station(&st_dir.join(format!("{}.csv", s.name)), s)?;
        }
        write_raster_stack(&dir.join("radar.bin"), &self.radar)?;
        let mask: Vec<f64> = self.basin.iter().map(|b| *b as u8 as f64).collect();
        write_grid_table(
            &dir.join("basin.csv"),
            &self.grid,
            &[
                ("basin", &mask),
                ("covariate", &self.covariate),
                ("location", &self.location_field()),
            ],
        )?;
        write_json(&dir.join("truth.json"), &self.config)
    }
}

/// Smooth mean-rainfall surface between roughly 0.08 and 0.14 mm/h.
fn covariate_at(x: f64, y: f64, width: f64, height: f64) -> f64 {
    let (u, v) = (x / width, y / height);
    let tau = std::f64::consts::TAU;
    0.105 + 0.025 * (u - 0.5) - 0.015 * (v - 0.5)
        + 0.01 * (tau * u * 1.3).sin() * (tau * v * 0.9).cos()
}

/// Rotated ellipse covering a little under a quarter of the grid.
fn basin_mask(grid: &SpatialGrid, width: f64, height: f64) -> Vec<bool> {
    let (cx, cy) = (0.5 * width, 0.47 * height);
    let (ra, rb) = (0.38 * width, 0.2 * height);
    let (c, s) = (0.5f64.cos(), 0.5f64.sin());
    (0..grid.len())
        .map(|i| {
            let p = grid.coords(i);
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            (u / ra).powi(2) + (v / rb).powi(2) <= 1.0
        })
        .collect()
}

/// Gauge record: dry hours, a wet body below `b`, and GPD excesses above `b`
/// with probability `tail_prob`.
fn gauge_series<R: Rng>(
    rng: &mut R,
    cfg: &SyntheticBasinConfig,
    b: f64,
    hours: usize,
) -> Result<Vec<Option<f64>>> {
    let t = &cfg.truth;
    (0..hours)
        .map(|_| {
            if rng.random::<f64>() < cfg.missing_prob {
                return Ok(None);
            }
            let u: f64 = rng.random();
            let v = if u < cfg.tail_prob {
                b + gpd_quantile(rng.random(), t.a, t.xi)?
            } else if u < cfg.tail_prob + cfg.wet_prob {
                b * rng.random::<f64>().powi(2)
            } else {
                0.0
            };
            Ok(Some(v))
        })
        .collect()
}

pub fn generate_basin(cfg: &SyntheticBasinConfig) -> Result<SyntheticBasin> {
    if cfg.stations_inside > cfg.n_stations || cfg.min_hours == 0 || cfg.min_hours > cfg.max_hours {
        return Err(Error::Config("inconsistent station settings".into()));
    }
    if !(0.0..1.0).contains(&cfg.event_fraction) || cfg.radar_frames == 0 {
        return Err(Error::Config(
            "event fraction must lie in [0, 1) with at least one frame".into(),
        ));
    }
    let grid = SpatialGrid::regular_2d((0.0, 0.0), cfg.nx, cfg.ny, cfg.spacing)?;
    let (width, height) = (
        (cfg.nx - 1) as f64 * cfg.spacing,
        (cfg.ny - 1) as f64 * cfg.spacing,
    );
    let covariate: Vec<f64> = (0..grid.len())
        .map(|i| covariate_at(grid.coords(i)[0], grid.coords(i)[1], width, height))
        .collect();
    let basin = basin_mask(&grid, width, height);
    let seed = Seed(cfg.seed);

    let inside: Vec<usize> = (0..grid.len()).filter(|&i| basin[i]).collect();
    let outside: Vec<usize> = (0..grid.len()).filter(|&i| !basin[i]).collect();
    let n_out = cfg.n_stations - cfg.stations_inside;
    if inside.len() < cfg.stations_inside || outside.len() < n_out {
        return Err(Error::Config(
            "grid too small for the requested stations".into(),
        ));
    }
    let mut rng = seed.derive(1).stream(0);
    let mut station_cells: Vec<usize> = sample_indices(&mut rng, inside.len(), cfg.stations_inside)
        .into_iter()
        .map(|k| inside[k])
        .collect();
    station_cells.extend(
        sample_indices(&mut rng, outside.len(), n_out)
            .into_iter()
            .map(|k| outside[k]),
    );

    let t = &cfg.truth;
    let stations = station_cells
        .iter()
        .enumerate()
        .map(|(k, &cell)| {
            let mut rng = seed.derive(2).stream(k as u64);
            let hours = rng.random_range(cfg.min_hours..=cfg.max_hours);
            let first = START_HOUR + (cfg.max_hours - hours) as i64;
            let b = t.b1 + t.b2 * covariate[cell];
            let values = gauge_series(&mut rng, cfg, b, hours)?;
            let p = grid.coords(cell);
            StationSeries::new(
                format!("station{:02}", k + 1),
                Location::d2(p[0], p[1]),
                (0..hours as i64).map(|h| first + h).collect(),
                values,
                true,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let radar = radar_stack(cfg, &grid, &covariate, seed.derive(3))?;
    Ok(SyntheticBasin {
        config: cfg.clone(),
        grid,
        covariate,
        basin,
        station_cells,
        stations,
        radar,
    })
}

/// Raster frames: event frames are supremum-conditioned r-Pareto fields on
/// the pole scale, compressed by a power `ξ`; other frames carry light-tailed
/// drizzle. Each cell's series is finally rescaled to have time mean `y(s)`,
/// which leaves per-cell ranks, hence the extremogram, unchanged.
fn radar_stack(
    cfg: &SyntheticBasinConfig,
    grid: &SpatialGrid,
    covariate: &[f64],
    seed: Seed,
) -> Result<RasterStack> {
    let len = grid.len();
    let frames = cfg.radar_frames;
    let n_events = ((frames as f64 * cfg.event_fraction).round() as usize)
        .max(1)
        .min(frames);
    let marginal = MarginalModel::constant(len, 1.0, 0.0, 1.0)?;
    let spec = ParetoSpec::new(cfg.truth.model, marginal, RiskFunctional::Supremum, 1.0);
    let events = simulate_r_pareto(&spec, grid, n_events, seed.derive(0))?.pole_scale();

    let mut rng = seed.derive(1).stream(0);
    let event_frames: Vec<usize> = {
        let mut v = sample_indices(&mut rng, frames, n_events).into_vec();
        v.sort_unstable();
        v
    };
    let mut data = vec![0.0; frames * len];
    let mut next_event = 0;
    for f in 0..frames {
        let row = &mut data[f * len..(f + 1) * len];
        if event_frames.get(next_event) == Some(&f) {
            for (x, y) in row.iter_mut().zip(events.row(next_event)) {
                *x = 4.0 * y.powf(cfg.truth.xi);
            }
            next_event += 1;
        } else if rng.random::<f64>() < 0.3 {
            let level: f64 = Exp1.sample(&mut rng);
            for x in row.iter_mut() {
                let e: f64 = Exp1.sample(&mut rng);
                *x = 0.5 * level * e;
            }
        }
    }
    for (s, y) in covariate.iter().enumerate() {
        let mean = (0..frames).map(|f| data[f * len + s]).sum::<f64>() / frames as f64;
        let scale = if mean > 0.0 { y / mean } else { 0.0 };
        for f in 0..frames {
            data[f * len + s] *= scale;
        }
    }
    let times = (0..frames as i64).map(|h| START_HOUR + h).collect();
    RasterStack::new(grid.clone(), times, SampleMatrix::new(frames, len, data)?)
}
