//! Reference experiments on a line segment: concurrent and exclusive
//! exceedance curves, and small sequential designs started from the boundary
//! or at random.

use serde::{Deserialize, Serialize};

use crate::design::{
    forward_backward_refine, sequential_design, DesignProblem, DesignState, Initialization,
};
use crate::domain::{RiskFunctional, SpatialGrid};
use crate::error::{Error, Result};
use crate::fit::sorted_quantile;
use crate::samples::SampleMatrix;
use crate::simulate::{
    simulate_gaussian_exceedances, simulate_r_pareto, MarginalModel, ParetoSpec, Seed,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::variogram::VariogramModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    /// Stationary Gaussian field with covariance `sill − γ(h)`.
    Gaussian,
    /// Generalized r-Pareto process with margins `a = 1`, `b = 0`.
    Pareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub name: String,
    pub kind: ProcessKind,
    pub model: VariogramModel,
    /// Tail index of the Pareto margins; ignored for Gaussian fields.
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn default_xi() -> f64 {
    1.0
}

impl ProcessConfig {
    /// Gaussian field, bounded exponential variogram `σ = 2, α = 1.5, λ = 100`.
    pub fn gaussian_strong() -> Self {
        Self::new(
            "gaussian-strong",
            ProcessKind::Gaussian,
            VariogramModel::bounded_exponential(2.0, 1.5, 100.0),
        )
    }

    /// Gaussian field, bounded exponential variogram `σ = 2, α = 1.5, λ = 1`.
    pub fn gaussian_weak() -> Self {
        Self::new(
            "gaussian-weak",
            ProcessKind::Gaussian,
            VariogramModel::bounded_exponential(2.0, 1.5, 1.0),
        )
    }

    /// r-Pareto process, bounded exponential variogram `σ = 2, α = 1.5, λ = 10`.
    pub fn pareto_strong() -> Self {
        Self::new(
            "pareto-strong",
            ProcessKind::Pareto,
            VariogramModel::bounded_exponential(2.0, 1.5, 10.0),
        )
    }

    /// r-Pareto process, power-law variogram `α = 1.5, λ = 2.5`.
    pub fn pareto_weak() -> Self {
        Self::new(
            "pareto-weak",
            ProcessKind::Pareto,
            VariogramModel::power_law(1.5, 2.5),
        )
    }

    /// The four reference processes, strong before weak, Gaussian first.
    pub fn reference_set() -> Vec<Self> {
        vec![
            Self::gaussian_strong(),
            Self::gaussian_weak(),
            Self::pareto_strong(),
            Self::pareto_weak(),
        ]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::reference_set()
            .into_iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("unknown process '{name}'")))
    }

    fn new(name: &str, kind: ProcessKind, model: Result<VariogramModel>) -> Self {
        Self {
            name: name.into(),
            kind,
            model: model.expect("reference parameters are valid"),
            xi: 1.0,
        }
    }

    /// `n` fields on `grid` conditioned on `sup X ≥ u` (data scale).
    pub fn simulate_exceedances(
        &self,
        grid: &SpatialGrid,
        u: f64,
        n: usize,
        seed: Seed,
    ) -> Result<SampleMatrix> {
        let risk = RiskFunctional::Supremum;
        match self.kind {
            ProcessKind::Gaussian => simulate_gaussian_exceedances(
                &self.model,
                grid,
                &risk,
                u,
                n,
                seed,
                DEFAULT_MAX_ATTEMPTS,
            ),
            ProcessKind::Pareto => {
                let marginal = MarginalModel::constant(grid.len(), 1.0, 0.0, self.xi)?;
                let spec = ParetoSpec::new(self.model, marginal, risk, u);
                Ok(simulate_r_pareto(&spec, grid, n, seed)?.data_scale())
            }
        }
    }
}

/// The default experiment domain `[−6, 6]` with lag 0.1.
pub fn default_line_grid() -> SpatialGrid {
    SpatialGrid::regular_1d(-6.0, 6.0, 0.1).expect("valid grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryExperiment {
    pub threshold: f64,
    pub batches: usize,
    pub batch_size: usize,
    /// Step of the `h` sweeps.
    pub h_step: f64,
}

impl Default for BoundaryExperiment {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            batches: 100,
            batch_size: 1000,
            h_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub h: f64,
    /// Mean of the batch estimates.
    pub estimate: f64,
    /// 2.5% and 97.5% percentiles of the batch estimates.
    pub lower: f64,
    pub upper: f64,
}

impl CurvePoint {
    pub fn overlaps(&self, other: &CurvePoint) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurves {
    pub process: String,
    /// `P(sup_[0,1] X ≥ u, sup_[h,h+1] X ≥ u | sup_[0,1] X ≥ u)`, `h ∈ [0, 5]`.
    pub concurrent: Vec<CurvePoint>,
    /// `P(sup_{S_h} X ≥ u, sup_{S∖S_h} X < u | sup_S X ≥ u)` with
    /// `S_h = [h − ½, h + ½]`, `h ∈ [−5.5, 5.5]`.
    pub exclusive: Vec<CurvePoint>,
}

impl BoundaryCurves {
    pub fn exclusive_at(&self, h: f64) -> Option<&CurvePoint> {
        nearest_point(&self.exclusive, h)
    }

    pub fn concurrent_at(&self, h: f64) -> Option<&CurvePoint> {
        nearest_point(&self.concurrent, h)
    }
}

fn nearest_point(points: &[CurvePoint], h: f64) -> Option<&CurvePoint> {
    points
        .iter()
        .min_by(|a, b| (a.h - h).abs().total_cmp(&(b.h - h).abs()))
}

/// Index range of cells with coordinate in `[lo, hi]`.
fn cell_range(grid: &SpatialGrid, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let tol = 1e-9 * grid.spacing().max(1.0);
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let x = grid.coords(i)[0];
            x >= lo - tol && x <= hi + tol
        })
        .collect();
    match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) => a..b + 1,
        _ => 0..0,
    }
}

fn sweep(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Per-member prefix counts of exceeding cells.
fn exceedance_prefix(data: &SampleMatrix, u: f64) -> Vec<Vec<u32>> {
    data.iter_rows()
        .map(|row| {
            let mut acc = Vec::with_capacity(row.len() + 1);
            acc.push(0u32);
            let mut c = 0;
            for x in row {
                c += (*x >= u) as u32;
                acc.push(c);
            }
            acc
        })
        .collect()
}

fn summarize(h: &[f64], estimates: &[Vec<f64>]) -> Vec<CurvePoint> {
    h.iter()
        .enumerate()
        .map(|(k, &h)| {
            let mut col: Vec<f64> = estimates
                .iter()
                .map(|e| e[k])
                .filter(|v| v.is_finite())
                .collect();
            col.sort_by(f64::total_cmp);
            let estimate = if col.is_empty() {
                f64::NAN
            } else {
                col.iter().sum::<f64>() / col.len() as f64
            };
            CurvePoint {
                h,
                estimate,
                lower: sorted_quantile(&col, 0.025),
                upper: sorted_quantile(&col, 0.975),
            }
        })
        .collect()
}

/// Concurrent and exclusive exceedance curves on a 1-D grid, each point
/// summarized over independent batches.
pub fn boundary_effect_curves(
    process: &ProcessConfig,
    grid: &SpatialGrid,
    exp: &BoundaryExperiment,
    seed: Seed,
) -> Result<BoundaryCurves> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid(
            "boundary experiments run on a 1-D grid".into(),
        ));
    }
    if exp.batches == 0 || exp.batch_size == 0 || exp.h_step <= 0.0 {
        return Err(Error::InvalidParameter(
            "batches, batch size and h step must be positive".into(),
        ));
    }
    let (lo, hi) = (grid.coords(0)[0], grid.coords(grid.len() - 1)[0]);
    let concurrent_h = sweep(0.0, 5.0, exp.h_step);
    let exclusive_h = sweep(-5.5, 5.5, exp.h_step);
    if lo > -5.5 - 0.5 || hi < 5.5 + 0.5 {
        return Err(Error::InvalidGrid(format!(
            "grid [{lo}, {hi}] does not cover [-6, 6]"
        )));
    }
    let base = cell_range(grid, 0.0, 1.0);
    let shifted: Vec<_> = concurrent_h
        .iter()
        .map(|h| cell_range(grid, *h, h + 1.0))
        .collect();
    let windows: Vec<_> = exclusive_h
        .iter()
        .map(|h| cell_range(grid, h - 0.5, h + 0.5))
        .collect();

    let stream = seed.derive(fnv(&process.name));
    let mut conc = Vec::with_capacity(exp.batches);
    let mut excl = Vec::with_capacity(exp.batches);
    for b in 0..exp.batches {
        let data = process.simulate_exceedances(
            grid,
            exp.threshold,
            exp.batch_size,
            stream.derive(b as u64),
        )?;
        let prefix = exceedance_prefix(&data, exp.threshold);
        let hits = |p: &[u32], r: &std::ops::Range<usize>| p[r.end] - p[r.start];
        let base_hits: Vec<bool> = prefix.iter().map(|p| hits(p, &base) > 0).collect();
        let n_base = base_hits.iter().filter(|x| **x).count();
        conc.push(
            shifted
                .iter()
                .map(|r| {
                    let joint = prefix
                        .iter()
                        .zip(&base_hits)
                        .filter(|(p, b)| **b && hits(p, r) > 0)
                        .count();
                    joint as f64 / n_base as f64
                })
                .collect::<Vec<_>>(),
        );
        let n_all = prefix.iter().filter(|p| p[p.len() - 1] > 0).count();
        excl.push(
            windows
                .iter()
                .map(|r| {
                    let only = prefix
                        .iter()
                        .filter(|p| {
                            let inside = hits(p, r);
                            inside > 0 && inside == p[p.len() - 1]
                        })
                        .count();
                    only as f64 / n_all as f64
                })
                .collect::<Vec<_>>(),
        );
    }
    Ok(BoundaryCurves {
        process: process.name.clone(),
        concurrent: summarize(&concurrent_h, &conc),
        exclusive: summarize(&exclusive_h, &excl),
    })
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterativeExperiment {
    pub threshold: f64,
    pub additions: usize,
    pub n: usize,
    pub init: Initialization,
    /// Forward-backward sweeps after the greedy pass (0 disables).
    pub refine_sweeps: usize,
}

impl Default for IterativeExperiment {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            additions: 4,
            n: 10_000,
            init: Initialization::None,
            refine_sweeps: 0,
        }
    }
}

impl IterativeExperiment {
    /// Initial sites at both ends of `grid`.
    pub fn boundary_init(mut self, grid: &SpatialGrid) -> Self {
        self.init = Initialization::Sites {
            indices: vec![0, grid.len() - 1],
        };
        self
    }

    /// Two distinct random initial sites.
    pub fn random_init(mut self, seed: u64) -> Self {
        self.init = Initialization::Random { count: 2, seed };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStep {
    /// 1-based addition number.
    pub step: usize,
    pub index: usize,
    pub x: f64,
    pub discrepancy: f64,
    /// Coverage `P(max over design ∪ {s} ≥ u | sup_S X ≥ u)` per candidate
    /// cell, `None` for cells already in the design.
    pub coverage: Vec<Option<f64>>,
    /// `coverage` rescaled to `[0, 1]` over the candidates of the step.
    pub scaled: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeResult {
    pub process: String,
    pub initial: Vec<usize>,
    pub state: DesignState,
    pub steps: Vec<CoverageStep>,
}

impl IterativeResult {
    pub fn added_coords(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.state
            .chosen
            .iter()
            .map(|&i| grid.coords(i)[0])
            .collect()
    }
}

/// Sequential addition of sites to a fixed initial set under the supremum
/// functional, reporting the coverage surface seen at every step.
pub fn iterative_experiment(
    process: &ProcessConfig,
    grid: &SpatialGrid,
    exp: &IterativeExperiment,
    seed: Seed,
) -> Result<IterativeResult> {
    let risk = RiskFunctional::Supremum;
    let initial = exp.init.resolve(grid.len())?;
    let data = process.simulate_exceedances(grid, exp.threshold, exp.n, seed)?;
    let problem = DesignProblem::new(&data, &risk, exp.threshold)?;
    let mut state = sequential_design(&problem, grid, exp.additions, &initial)?;
    let reference = state.reference_prob;
    let steps = state
        .history
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let coverage: Vec<Option<f64>> = st
                .surface
                .iter()
                .map(|d| d.map(|d| 1.0 - d / reference))
                .collect();
            let (lo, hi) = coverage
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(*c), hi.max(*c))
                });
            let scaled = coverage
                .iter()
                .map(|c| c.map(|c| if hi > lo { (c - lo) / (hi - lo) } else { 1.0 }))
                .collect();
            CoverageStep {
                step: k + 1,
                index: st.index,
                x: grid.coords(st.index)[0],
                discrepancy: st.discrepancy,
                coverage,
                scaled,
            }
        })
        .collect();
    if exp.refine_sweeps > 0 && state.chosen.len() >= 2 {
        state = forward_backward_refine(state, &problem, grid, exp.refine_sweeps)?;
    }
    Ok(IterativeResult {
        process: process.name.clone(),
        initial,
        state,
        steps,
    })
}
