use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::SpatialGrid;
use crate::error::{Error, Result};
use crate::samples::SampleMatrix;
use crate::variogram::VariogramModel;

use super::sorted_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremogramConfig {
    /// Quantile level of the per-location thresholds.
    pub q: f64,
    /// Lag bin width; defaults to the grid spacing. Bins are centred on
    /// multiples of the width.
    pub bin_width: Option<f64>,
    /// Largest bin centre; defaults to half the grid diameter.
    pub max_lag: Option<f64>,
    /// Direction sectors over `[0, π)`; defaults to 4 in the plane, 1 on a line.
    pub sectors: Option<usize>,
    /// Bins with fewer site pairs are flagged unreliable.
    pub min_pairs: usize,
}

impl Default for ExtremogramConfig {
    fn default() -> Self {
        Self {
            q: 0.995,
            bin_width: None,
            max_lag: None,
            sectors: None,
            min_pairs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremogramBin {
    pub lag_lo: f64,
    pub lag_hi: f64,
    /// Mean distance of the pairs in the bin.
    pub lag: f64,
    pub sector: usize,
    /// Mean direction of the pairs in the bin (radians).
    pub angle: f64,
    pub rho: f64,
    /// Joint exceedances, counted for both orders of each pair.
    pub joint: u64,
    /// Marginal exceedances at both ends of each pair.
    pub marginal: u64,
    pub pairs: u64,
    pub reliable: bool,
}

impl ExtremogramBin {
    /// Representative lag vector in grid coordinates.
    pub fn lag_vector(&self, dim: usize) -> Vec<f64> {
        if dim == 1 {
            vec![self.lag]
        } else {
            vec![self.lag * self.angle.cos(), self.lag * self.angle.sin()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalExtremogram {
    pub q: f64,
    pub dim: usize,
    pub bin_width: f64,
    pub n_sectors: usize,
    pub thresholds: Vec<f64>,
    /// Nonempty bins ordered by sector, then lag.
    pub bins: Vec<ExtremogramBin>,
}

impl EmpiricalExtremogram {
    pub fn reliable_bins(&self) -> impl Iterator<Item = &ExtremogramBin> {
        self.bins.iter().filter(|b| b.reliable)
    }

    /// Copy with every estimate replaced by the model extremogram at the
    /// bin's representative lag.
    pub fn with_model_values(&self, model: &VariogramModel) -> Self {
        let mut out = self.clone();
        for b in &mut out.bins {
            b.rho = model.extremogram(&b.lag_vector(self.dim));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["lag", "sector", "rho", "pairs"])?;
        for b in &self.bins {
            w.write_record([
                b.lag.to_string(),
                b.sector.to_string(),
                b.rho.to_string(),
                b.pairs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    joint: u64,
    marginal: u64,
    pairs: u64,
    dist: f64,
    angle: f64,
}

fn grid_diameter(grid: &SpatialGrid) -> f64 {
    let dim = grid.dim();
    (0..dim)
        .map(|a| {
            let (lo, hi) = grid
                .locations()
                .iter()
                .map(|l| l.coords()[a])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c), hi.max(c))
                });
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Pairwise extremogram estimate: for each (lag bin, direction sector), the
/// ratio of joint exceedances to marginal exceedances of the per-location
/// empirical `q`-quantiles, pooled over all site pairs in the bin.
///
/// `fields` holds one time slice (or realization) per row.
pub fn empirical_extremogram(
    fields: &SampleMatrix,
    grid: &SpatialGrid,
    cfg: &ExtremogramConfig,
) -> Result<EmpiricalExtremogram> {
    if !(cfg.q > 0.5 && cfg.q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level {} outside (0.5, 1)",
            cfg.q
        )));
    }
    if fields.rows() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 time slices".into(),
        ));
    }
    if fields.cols() != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "fields have {} columns for {} grid cells",
            fields.cols(),
            grid.len()
        )));
    }
    let dim = grid.dim();
    let width = cfg.bin_width.unwrap_or(grid.spacing());
    if !(width > 0.0) {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let max_lag = cfg.max_lag.unwrap_or(0.5 * grid_diameter(grid)).max(width);
    let n_bins = (max_lag / width + 1e-9).floor() as usize;
    let n_sectors = cfg.sectors.unwrap_or(if dim == 1 { 1 } else { 4 }).max(1);
    let n_sectors = if dim == 1 { 1 } else { n_sectors };
    let sector_width = PI / n_sectors as f64;

    let t = fields.rows();
    let words = t.div_ceil(64);
    let l = grid.len();
    let (thresholds, bits): (Vec<f64>, Vec<Vec<u64>>) = (0..l)
        .into_par_iter()
        .map(|s| {
            let col = fields.column(s);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let u = sorted_quantile(&sorted, cfg.q);
            let mut b = vec![0u64; words];
            for (i, v) in col.iter().enumerate() {
                if *v >= u {
                    b[i / 64] |= 1 << (i % 64);
                }
            }
            (u, b)
        })
        .unzip();
    let counts: Vec<u64> = bits
        .iter()
        .map(|b| b.iter().map(|w| w.count_ones() as u64).sum())
        .collect();

    let cell = |d: f64, lag: &[f64]| -> Option<(usize, f64)> {
        let k = (d / width).round() as usize;
        if k == 0 || k > n_bins {
            return None;
        }
        let mut phi = if dim == 1 {
            0.0
        } else {
            lag[1].atan2(lag[0]).rem_euclid(PI)
        };
        // sectors are centred on 0, π/S, ...
        if phi >= PI - 0.5 * sector_width {
            phi -= PI;
        }
        let sector =
            (((phi + 0.5 * sector_width) / sector_width).floor() as usize).min(n_sectors - 1);
        Some(((sector * n_bins) + (k - 1), phi))
    };

    let partial: Vec<Vec<Acc>> = (0..l)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![Acc::default(); n_bins * n_sectors];
            for j in (i + 1)..l {
                let d = grid.distance(i, j);
                let lag = grid.lag(i, j);
                if let Some((idx, phi)) = cell(d, &lag) {
                    let joint: u64 = bits[i]
                        .iter()
                        .zip(&bits[j])
                        .map(|(a, b)| (a & b).count_ones() as u64)
                        .sum();
                    let a = &mut acc[idx];
                    a.joint += 2 * joint;
                    a.marginal += counts[i] + counts[j];
                    a.pairs += 1;
                    a.dist += d;
                    a.angle += phi;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Acc::default(); n_bins * n_sectors];
    for acc in &partial {
        for (t, a) in total.iter_mut().zip(acc) {
            t.joint += a.joint;
            t.marginal += a.marginal;
            t.pairs += a.pairs;
            t.dist += a.dist;
            t.angle += a.angle;
        }
    }

    let mut bins = Vec::new();
    for sector in 0..n_sectors {
        for k in 0..n_bins {
            let a = total[sector * n_bins + k];
            if a.pairs == 0 {
                continue;
            }
            let centre = (k + 1) as f64 * width;
            let rho = if a.marginal > 0 {
                a.joint as f64 / a.marginal as f64
            } else {
                0.0
            };
            bins.push(ExtremogramBin {
                lag_lo: centre - 0.5 * width,
                lag_hi: centre + 0.5 * width,
                lag: a.dist / a.pairs as f64,
                sector,
                angle: a.angle / a.pairs as f64,
                rho,
                joint: a.joint,
                marginal: a.marginal,
                pairs: a.pairs,
                reliable: a.marginal > 0 && a.pairs as usize >= cfg.min_pairs,
            });
        }
    }
    Ok(EmpiricalExtremogram {
        q: cfg.q,
        dim,
        bin_width: width,
        n_sectors,
        thresholds,
        bins,
    })
}
